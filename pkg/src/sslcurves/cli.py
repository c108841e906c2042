"""Command-line entry points: ``run``, ``plot`` and ``validate``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .data import REGISTRY, load_dataset
from .errors import ConfigError, SSLCurvesError
from .experiment import ExperimentConfig, run_grid
from .report import METRICS, plot_cells, read_cells_csv, write_cells_csv, write_cells_json

DATA_ENV = "SSLCURVES_DATA"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("sslcurves")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_data_dir() -> str:
    return os.environ.get(DATA_ENV, "data")


def cmd_run(config_path, out_dir, audit=False, workers=1) -> int:
    try:
        with open(config_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config {config_path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = ExperimentConfig.from_text(text, base_dir=os.path.dirname(os.path.abspath(config_path)))
    except ConfigError as exc:
        print(f"error: {config_path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if "data_dir" not in text:
        cfg.data_dir = default_data_dir()
    os.makedirs(out_dir, exist_ok=True)
    audit_fh = open(os.path.join(out_dir, "reps.jsonl"), "w", encoding="utf-8") if audit else None
    try:
        cells, _ = run_grid(cfg, workers=workers, audit=audit_fh)
    except (OSError, KeyError, SSLCurvesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if audit_fh is not None:
            audit_fh.close()
    write_cells_csv(cells, os.path.join(out_dir, "cells.csv"))
    write_cells_json(cells, os.path.join(out_dir, "cells.json"))
    log.info("wrote %d cells to %s", len(cells), out_dir)
    return EXIT_OK


def cmd_plot(cells_path, metric, out_dir, band="se") -> int:
    if metric not in METRICS:
        print(f"error: unknown metric {metric!r}; choose from {sorted(METRICS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cells = read_cells_csv(cells_path)
        paths = plot_cells(cells, metric, out_dir, band)
    except (OSError, SSLCurvesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_validate(data_dir, stream=None) -> int:
    """Check every registry dataset in ``data_dir``; one PASS/FAIL line each."""
    stream = stream or sys.stdout
    failures = 0
    for name, spec in REGISTRY.items():
        path = os.path.join(data_dir, spec.filename)
        try:
            ds = load_dataset(path, spec)
        except FileNotFoundError:
            failures += 1
            print(f"FAIL {name}: missing file {path}", file=stream)
            continue
        except SSLCurvesError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}", file=stream)
            continue
        print(f"PASS {name}: N={ds.n} d={ds.dim} smallest_prior={ds.class_fractions().min():.4f}"
              f" (expected {spec.expected_objects}/{spec.expected_dims}/"
              f"{spec.expected_smallest_prior})", file=stream)
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def build_parser():
    parser = _Parser(prog="sslcurves", description="Semi-supervised NMC/LDA learning curves.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--audit", action="store_true", help="write per-repetition records to reps.jsonl")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("plot", help="render SVG learning curves from cells.csv")
    p.add_argument("--cells", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--band", choices=("se", "sd"), default="se")

    p = sub.add_parser("validate", help="check dataset files against the registry")
    p.add_argument("--data", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.audit, args.workers)
    if args.command == "plot":
        return cmd_plot(args.cells, args.metric, args.out, args.band)
    return cmd_validate(args.data or default_data_dir())


if __name__ == "__main__":
    sys.exit(main())
