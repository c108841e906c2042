"""Convert raw UCI copies into the canonical CSV layout used by ``sslcurves``.

The raw files are taken from two PyPI wheels that redistribute UCI data, plus
scikit-learn's bundled copy of wdbc::

    pip download --no-deps keel-ds==0.2.5 imbalanced-databases==0.1.1 -d wheels/
    python scripts/prepare_data.py --wheels wheels/ --out data/

Column handling:

* ionosphere: the KEEL copy already drops the constant second attribute (33 dims).
* spect / spectf: train and test splits are concatenated; label is the first column.
* KEEL copies of ionosphere and sonar carry at most four decimals.
* transfusion has no redistributable copy in either wheel; place a canonical
  ``transfusion.csv`` (recency, frequency, time, label; the monetary column is
  frequency * 250 and is dropped) in the output directory by hand.
"""

import argparse
import glob
import os
import zipfile

import numpy as np

KEEL_FILES = {
    "haberman": "keel_ds/data/imbalanced/raw/haberman.dat",
    "ionosphere": "keel_ds/data/balanced/raw/ionosphere.dat",
    "pima": "keel_ds/data/balanced/raw/pima.dat",
    "sonar": "keel_ds/data/balanced/raw/sonar.dat",
}
SPECT_DIR = "imbalanced_databases/data/spect_f/"


def _keel_rows(text):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([tok.strip() for tok in line.split(",")])
    return rows


def _spect_rows(zf, stem):
    rows = []
    for part in ("train", "test"):
        text = zf.read(f"{SPECT_DIR}{stem}.{part}.txt").decode()
        for line in text.splitlines():
            if line.strip():
                toks = [t.strip() for t in line.split(",")]
                rows.append(toks[1:] + toks[:1])
    return rows


def _write(path, rows):
    with open(path, "w", newline="\n") as fh:
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"wrote {path}: {len(rows)} rows x {len(rows[0]) - 1} features")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wheels", required=True, help="directory holding the downloaded wheels")
    parser.add_argument("--out", required=True)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    keel = zipfile.ZipFile(glob.glob(os.path.join(args.wheels, "keel_ds-*.whl"))[0])
    for name, member in KEEL_FILES.items():
        _write(os.path.join(args.out, f"{name}.csv"), _keel_rows(keel.read(member).decode()))

    imb = zipfile.ZipFile(glob.glob(os.path.join(args.wheels, "imbalanced_databases-*.whl"))[0])
    _write(os.path.join(args.out, "spect.csv"), _spect_rows(imb, "SPECT"))
    _write(os.path.join(args.out, "spectf.csv"), _spect_rows(imb, "SPECTF"))

    from sklearn.datasets import load_breast_cancer

    bc = load_breast_cancer()
    # sklearn codes malignant as 0; keep the UCI tokens
    tokens = np.where(bc.target == 0, "M", "B")
    rows = [[repr(float(v)) for v in x] + [t] for x, t in zip(bc.data, tokens)]
    _write(os.path.join(args.out, "wdbc.csv"), rows)


if __name__ == "__main__":
    main()
