"""Objective fractional-Bayes-factor marginal likelihoods for covariate-adjusted
Gaussian DAG and decomposable graphical models, plus structure search."""

from .errors import (
    CycleError,
    DagscoreError,
    DataIOError,
    DomainError,
    NotChordalError,
    NotSPDError,
    ProprietyError,
    RankDeficientError,
)
from .fractional import FractionalConfig, FractionParams, SubsetScore, log_ml_iid, log_ml_subset
from .graphs import (
    Dag,
    DecomposableGraph,
    all_dags,
    all_decomposable,
    check_decomposable,
    directed_version,
    fingerprint,
    parse_dag_text,
    parse_ug_text,
    validate_dag,
)
from .mnw import (
    DesignMatrix,
    MnwHyper,
    PredictorPool,
    ResponseMatrix,
    compute_stats,
    log_marginal_full,
    log_norm_const,
    posterior_update,
    subset_hyper,
)
from .scorer import ScoreCache, ScoreReport, SubsetScorer, dag_log_ml, decomposable_log_ml
from .search import ModelPrior, SearchResult, exhaustive_small, greedy_dag_search, mc3_decomposable

__version__ = "0.1.0"
