"""Supervised, self-learned and moment-constrained NMC/LDA with learning-curve experiments."""

from .data import REGISTRY, DatasetSpec, SyntheticSpec, generate_synthetic, load_dataset, read_csv, write_csv
from .model import (
    LDA,
    NMC,
    Dataset,
    EvalResult,
    FitReport,
    GaussianClassifier,
    evaluate,
    fit_lda_supervised,
    fit_nmc_supervised,
    log_joint,
    log_marginal,
    posterior,
    predict,
)
from .semi import (
    MomentStats,
    ScatterDecomposition,
    SelfLearnTrace,
    compute_moments,
    decompose_scatter,
    fit_em_soft,
    fit_lda_constrained,
    fit_nmc_constrained,
    fit_self_learned,
)

__version__ = "0.1.0"
