"""Monte Carlo learning curves over unlabeled sample size.

Every repetition draws its labeled and unlabeled sets with replacement from a
dataset and evaluates the fitted classifier on the full dataset, which plays
the role of the true distribution. Random streams are derived statelessly from
a master seed and the repetition's coordinates, so results do not depend on
how cells are scheduled over workers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import REGISTRY, load_registered
from .errors import ConfigError, RedrawLimitExceeded
from .model import KINDS, LDA, NMC, Dataset, evaluate, fit_supervised
from .semi import fit_constrained, fit_em_soft, fit_self_learned

METHODS = ("supervised", "self_learned", "em_soft", "constrained")

MASK64 = (1 << 64) - 1
_LABELED_STREAM = 0x4C4142
_UNLABELED_STREAM = 0x554E4C
# replacement repetition seeds tried before a cell gives up
MAX_REPLACEMENTS = 1000


def splitmix64(x: int) -> int:
    """SplitMix64 output function (Steele, Lea & Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def mix_seed(*keys) -> int:
    """Fold integer or string keys into one 64-bit seed with SplitMix64."""
    h = 0
    for key in keys:
        if isinstance(key, str):
            key = fnv1a64(key)
        h = splitmix64(h ^ (int(key) & MASK64))
    return h


def rep_seeds(master_seed, dataset, method_id, n_labeled, n_unlabeled, rep, attempt=0):
    """Seeds for the labeled and unlabeled draws of one repetition.

    The labeled seed ignores ``n_unlabeled``, so every unlabeled size of a
    curve sees the same labeled sets.
    """
    base = (master_seed, dataset, method_id, n_labeled)
    labeled = mix_seed(*base, _LABELED_STREAM, rep, attempt)
    unlabeled = mix_seed(*base, _UNLABELED_STREAM, n_unlabeled, rep, attempt)
    return labeled, unlabeled


@dataclass
class TrainingDraw:
    X: np.ndarray
    y: np.ndarray
    U: np.ndarray
    labeled_index: np.ndarray
    unlabeled_index: np.ndarray
    redraws: int


def draw_training_sets(dataset: Dataset, n_labeled, n_unlabeled, seeds, min_per_class=1,
                       max_redraws=1000, stratified=False) -> TrainingDraw:
    """With-replacement labeled and unlabeled draws from ``dataset``.

    Labeled draws are repeated wholesale until every class has at least
    ``min_per_class`` members. With ``stratified`` the required members are
    drawn per class first and the rest from the whole set.
    """
    labeled_seed, unlabeled_seed = seeds
    K = dataset.n_classes
    rng = np.random.default_rng(labeled_seed)
    redraws = 0
    if stratified:
        parts = [rng.choice(np.flatnonzero(dataset.labels == k), min_per_class) for k in range(K)]
        rest = rng.integers(0, dataset.n, max(n_labeled - K * min_per_class, 0))
        idx = np.concatenate(parts + [rest])
    else:
        while True:
            idx = rng.integers(0, dataset.n, n_labeled)
            if np.bincount(dataset.labels[idx], minlength=K).min() >= min_per_class:
                break
            redraws += 1
            if redraws > max_redraws:
                raise RedrawLimitExceeded(
                    f"{dataset.name}: no labeled draw of size {n_labeled} with "
                    f">= {min_per_class} per class after {max_redraws} redraws"
                )
    uidx = np.random.default_rng(unlabeled_seed).integers(0, dataset.n, n_unlabeled)
    return TrainingDraw(
        dataset.features[idx], dataset.labels[idx], dataset.features[uidx], idx, uidx, redraws
    )


@dataclass
class ExperimentConfig:
    datasets: list = field(default_factory=lambda: sorted(REGISTRY))
    methods: list = field(default_factory=lambda: [
        (m, k) for k in (NMC, LDA) for m in ("supervised", "self_learned", "constrained")
    ])
    labeled_sizes: dict = field(default_factory=lambda: {NMC: [4, 10], LDA: [100]})
    unlabeled_sizes: list = field(default_factory=lambda: [2, 8, 32, 128, 512, 2048])
    repetitions: int = 1000
    master_seed: int = 20130101
    min_per_class: dict = field(default_factory=lambda: {NMC: 1, LDA: 2})
    max_redraws: int = 1000
    max_iter: int = 100
    em_tol: float = 1e-8
    stratified: bool = False
    data_dir: str = "data"

    def __post_init__(self):
        self.methods = [tuple(m) for m in self.methods]
        for method, kind in self.methods:
            if method not in METHODS or kind not in KINDS:
                raise ConfigError(f"unknown method {method}:{kind}")
        sizes = list(self.unlabeled_sizes)
        if any(s < 1 for s in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("unlabeled_sizes must be positive and strictly increasing")
        if any(s < 1 for v in self.labeled_sizes.values() for s in v):
            raise ConfigError("labeled sizes must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")

    @classmethod
    def nmc_default(cls, **kw):
        kw.setdefault("methods", [(m, NMC) for m in ("supervised", "self_learned", "constrained")])
        return cls(**kw)

    @classmethod
    def lda_default(cls, **kw):
        kw.setdefault("methods", [(m, LDA) for m in ("supervised", "self_learned", "constrained")])
        return cls(**kw)

    def cell_keys(self):
        """(dataset, method, kind, n_labeled, n_unlabeled) in output order."""
        for name in self.datasets:
            for method, kind in self.methods:
                for n_l in self.labeled_sizes[kind]:
                    for n_u in self.unlabeled_sizes:
                        yield name, method, kind, n_l, n_u

    # -- flat "key = value" text form

    def to_text(self) -> str:
        lines = [
            f"datasets = {', '.join(self.datasets)}",
            f"methods = {', '.join(f'{m}:{k}' for m, k in self.methods)}",
            f"labeled_sizes_nmc = {', '.join(map(str, self.labeled_sizes.get(NMC, [])))}",
            f"labeled_sizes_lda = {', '.join(map(str, self.labeled_sizes.get(LDA, [])))}",
            f"unlabeled_sizes = {', '.join(map(str, self.unlabeled_sizes))}",
            f"repetitions = {self.repetitions}",
            f"master_seed = {self.master_seed}",
            f"min_per_class_nmc = {self.min_per_class[NMC]}",
            f"min_per_class_lda = {self.min_per_class[LDA]}",
            f"max_redraws = {self.max_redraws}",
            f"max_iter = {self.max_iter}",
            f"em_tol = {self.em_tol!r}",
            f"stratified = {str(self.stratified).lower()}",
            f"data_dir = {self.data_dir}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base_dir: str | None = None) -> "ExperimentConfig":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value

        def ints(v):
            return [int(s) for s in v.split(",") if s.strip()]

        def names(v):
            return [s.strip() for s in v.split(",") if s.strip()]

        kw = {}
        labeled, floor = {NMC: [4, 10], LDA: [100]}, {NMC: 1, LDA: 2}
        try:
            for key, value in raw.items():
                if key == "datasets":
                    kw["datasets"] = names(value)
                elif key == "methods":
                    kw["methods"] = [tuple(s.split(":")) for s in names(value)]
                elif key.startswith("labeled_sizes_"):
                    labeled[key.rsplit("_", 1)[1]] = ints(value)
                elif key.startswith("min_per_class_"):
                    floor[key.rsplit("_", 1)[1]] = int(value)
                elif key == "unlabeled_sizes":
                    kw["unlabeled_sizes"] = ints(value)
                elif key in ("repetitions", "master_seed", "max_redraws", "max_iter"):
                    kw[key] = int(value)
                elif key == "em_tol":
                    kw[key] = float(value)
                elif key == "stratified":
                    kw[key] = value.lower() in ("1", "true", "yes")
                elif key == "data_dir":
                    kw[key] = value
                else:
                    raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"bad config value: {exc}") from None
        kw["labeled_sizes"] = labeled
        kw["min_per_class"] = floor
        cfg = cls(**kw)
        if base_dir is not None and "data_dir" in kw and not os.path.isabs(cfg.data_dir):
            cfg.data_dir = os.path.join(base_dir, cfg.data_dir)
        return cfg


@dataclass(frozen=True)
class RepRecord:
    dataset: str
    method: str
    classifier: str
    n_labeled: int
    n_unlabeled: int
    rep: int
    error: float
    joint_ll: float
    marginal_ll: float
    redraws: int
    flags: str = ""
    iterations: int = 0
    objective: tuple = ()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class CurveCell:
    dataset: str
    method: str
    classifier: str
    n_labeled: int
    n_unlabeled: int
    n_reps: int
    mean_error: float
    sd_error: float
    se_error: float
    mean_joint_ll: float
    sd_joint_ll: float
    se_joint_ll: float
    mean_marginal_ll: float
    sd_marginal_ll: float
    se_marginal_ll: float
    degenerate_draws: int


def summarize(values):
    """Mean, sample standard deviation and standard error (sd = 0 for one value)."""
    n = len(values)
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return mean, sd, sd / math.sqrt(n)


def fit_method(method, kind, X, y, U, config: ExperimentConfig):
    """Fit one of the four training strategies; returns (model, self-learning trace or None)."""
    if method == "supervised":
        return fit_supervised(kind, X, y), None
    if method == "constrained":
        return fit_constrained(kind, X, y, U), None
    if method == "self_learned":
        return fit_self_learned(kind, X, y, U, max_iter=config.max_iter)
    if method == "em_soft":
        return fit_em_soft(kind, X, y, U, max_iter=config.max_iter, tol=config.em_tol), None
    raise ConfigError(f"unknown method {method!r}")


def _flags(model, trace, replaced):
    flags = []
    r = model.report
    if replaced:
        flags.append(f"replaced={replaced}")
    if r.variance_clamped:
        flags.append("variance_clamped")
    if r.ridge:
        flags.append("ridge")
    if r.psd_repaired:
        flags.append(f"psd_repaired={r.n_eigen_clamped}")
    if trace is not None and not trace.converged:
        flags.append("not_converged")
    return ";".join(flags)


def run_cell(dataset: Dataset, method, kind, n_labeled, n_unlabeled, config: ExperimentConfig):
    """Run all repetitions of one cell; returns ``(CurveCell, [RepRecord])``."""
    method_id = f"{method}:{kind}"
    min_pc = config.min_per_class[kind]
    records = []
    degenerate = 0
    for rep in range(config.repetitions):
        attempt = 0
        while True:
            seeds = rep_seeds(config.master_seed, dataset.name, method_id, n_labeled,
                              n_unlabeled, rep, attempt)
            try:
                draw = draw_training_sets(dataset, n_labeled, n_unlabeled, seeds, min_pc,
                                          config.max_redraws, config.stratified)
                break
            except RedrawLimitExceeded:
                degenerate += config.max_redraws + 1
                attempt += 1
                if attempt > MAX_REPLACEMENTS:
                    raise
        degenerate += draw.redraws
        model, trace = fit_method(method, kind, draw.X, draw.y, draw.U, config)
        res = evaluate(model, dataset)
        records.append(RepRecord(
            dataset.name, method, kind, n_labeled, n_unlabeled, rep,
            res.error_rate, res.avg_joint_loglik, res.avg_marginal_loglik, draw.redraws,
            _flags(model, trace, attempt),
            trace.iterations if trace is not None else 0,
            trace.objective_per_iter if trace is not None else (),
        ))
    return aggregate(records, degenerate), records


def aggregate(records, degenerate_draws=0) -> CurveCell:
    first = records[0]
    err = summarize([r.error for r in records])
    joint = summarize([r.joint_ll for r in records])
    marg = summarize([r.marginal_ll for r in records])
    return CurveCell(
        first.dataset, first.method, first.classifier, first.n_labeled, first.n_unlabeled,
        len(records), *err, *joint, *marg, degenerate_draws,
    )


def _cell_task(args):
    dataset, key, config = args
    _, method, kind, n_l, n_u = key
    return run_cell(dataset, method, kind, n_l, n_u, config)


def run_grid(config: ExperimentConfig, workers: int = 1, audit=None, datasets=None):
    """Run every cell of ``config`` in deterministic order.

    ``audit`` may be a writable text stream receiving one JSON line per
    repetition. ``datasets`` optionally maps names to preloaded datasets.
    Returns ``(cells, records)``.
    """
    loaded = dict(datasets or {})
    for name in config.datasets:
        if name not in loaded:
            loaded[name] = load_registered(name, config.data_dir)
    tasks = [(loaded[key[0]], key, config) for key in config.cell_keys()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [_cell_task(t) for t in tasks]
    cells, records = [], []
    for cell, recs in results:
        cells.append(cell)
        records.extend(recs)
        if audit is not None:
            for r in recs:
                audit.write(r.to_json() + "\n")
    return cells, records
