"""Loading the two-class benchmark sets and generating synthetic Gaussian data.

Canonical CSV: no header, comma separated, ``d`` numeric feature columns and a
final label column holding any token. Labels are recoded so that the majority
class is 0 (ties go to the token seen first).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpec, NotTwoClass, ParseError, PriorMismatch, ShapeMismatch
from .model import LDA, NMC, Dataset, FitReport, GaussianClassifier

PRIOR_TOLERANCE = 0.005


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    expected_objects: int
    expected_dims: int
    expected_smallest_prior: float
    positive_label_token: str | None = None

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"


REGISTRY = {
    s.name: s
    for s in [
        DatasetSpec("haberman", 306, 3, 0.26),
        DatasetSpec("ionosphere", 351, 33, 0.36),
        DatasetSpec("pima", 768, 8, 0.35),
        DatasetSpec("sonar", 208, 60, 0.47),
        DatasetSpec("spect", 267, 22, 0.21),
        DatasetSpec("spectf", 267, 44, 0.21),
        DatasetSpec("transfusion", 748, 3, 0.24),
        DatasetSpec("wdbc", 569, 30, 0.37),
    ]
}


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [cell.strip() for cell in row]
            if not row or all(cell == "" for cell in row):
                continue
            yield lineno, row


def read_csv(path, name: str | None = None, expected_dims: int | None = None) -> Dataset:
    """Parse a canonical CSV into a two-class :class:`Dataset`."""
    name = name or os.path.splitext(os.path.basename(path))[0]
    features, tokens = [], []
    for lineno, row in _read_rows(path):
        d = len(row) - 1
        if expected_dims is None:
            expected_dims = d
        if d != expected_dims:
            raise ShapeMismatch(
                f"{name}: line {lineno} has {d} feature columns, expected d={expected_dims}"
            )
        try:
            features.append([float(cell) for cell in row[:-1]])
        except ValueError as exc:
            raise ParseError(f"{name}: line {lineno}: {exc}") from None
        tokens.append(row[-1])
    if not features:
        raise ShapeMismatch(f"{name}: no data rows in {path}")

    order, counts = [], {}
    for tok in tokens:
        if tok not in counts:
            order.append(tok)
            counts[tok] = 0
        counts[tok] += 1
    if len(order) != 2:
        raise NotTwoClass(f"{name}: expected 2 label values, found {len(order)}: {order[:5]}")
    # sorted is stable, so equal counts keep first-occurrence order
    ranked = sorted(order, key=lambda t: -counts[t])
    code = {tok: i for i, tok in enumerate(ranked)}
    labels = np.array([code[t] for t in tokens])
    X = np.array(features, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ParseError(f"{name}: non-finite feature values")
    return Dataset(name, X, labels, 2)


def load_dataset(path, spec: DatasetSpec) -> Dataset:
    """Load ``path`` and check it against the registry entry ``spec``."""
    ds = read_csv(path, spec.name, spec.expected_dims)
    if ds.dim != spec.expected_dims:
        raise ShapeMismatch(f"{spec.name}: expected d={spec.expected_dims}, found d={ds.dim}")
    if ds.n != spec.expected_objects:
        raise ShapeMismatch(f"{spec.name}: expected N={spec.expected_objects}, found N={ds.n}")
    smallest = float(ds.class_fractions().min())
    if abs(smallest - spec.expected_smallest_prior) > PRIOR_TOLERANCE:
        raise PriorMismatch(
            f"{spec.name}: smallest prior {smallest:.4f}, expected "
            f"{spec.expected_smallest_prior} +/- {PRIOR_TOLERANCE}"
        )
    return ds


def load_registered(name: str, data_dir) -> Dataset:
    try:
        spec = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {sorted(REGISTRY)}") from None
    path = os.path.join(data_dir, spec.filename)
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset {name!r} not found at {path}")
    return load_dataset(path, spec)


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` in canonical form; floats use their shortest round-trip repr."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for x, y in zip(dataset.features, dataset.labels):
            fh.write(",".join(repr(float(v)) for v in x) + f",{int(y)}\n")


@dataclass(frozen=True)
class SyntheticSpec:
    """Two spherical Gaussians at ``-mean_separation`` (class 0) and ``+mean_separation``."""

    d: int
    mean_separation: tuple
    sigma: float
    priors: tuple
    n: int
    seed: int


def generate_synthetic(spec: SyntheticSpec):
    """Sample ``spec.n`` points; returns ``(Dataset, true model)``.

    The true model is NMC-kind when the priors are equal, LDA-kind otherwise.
    """
    offset = np.asarray(spec.mean_separation, dtype=float)
    priors = np.asarray(spec.priors, dtype=float)
    if spec.n < 1:
        raise InvalidSpec("n must be positive")
    if spec.d < 1 or offset.shape != (spec.d,):
        raise InvalidSpec(f"mean_separation must have length d={spec.d}")
    if not spec.sigma > 0:
        raise InvalidSpec("sigma must be positive")
    if priors.shape != (2,) or np.any(priors <= 0) or abs(priors.sum() - 1) > 1e-12:
        raise InvalidSpec(f"priors must be a positive 2-simplex, got {spec.priors}")
    rng = np.random.default_rng(spec.seed)
    means = np.stack([-offset, offset])
    y = (rng.random(spec.n) >= priors[0]).astype(np.int64)
    X = means[y] + spec.sigma * rng.standard_normal((spec.n, spec.d))
    try:
        ds = Dataset(f"synthetic-{spec.seed}", X, y, 2)
    except Exception as exc:
        raise InvalidSpec(f"sample does not contain both classes: {exc}") from None
    s2 = float(spec.sigma) ** 2
    report = FitReport(method="true")
    if priors[0] == priors[1]:
        true = GaussianClassifier(NMC, priors, means, s2, report)
    else:
        true = GaussianClassifier(LDA, priors, means, s2 * np.eye(spec.d), report)
    return ds, true
