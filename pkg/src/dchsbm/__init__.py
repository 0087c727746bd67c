"""Spectral clustering for the degree-corrected hypergraph stochastic block model."""
from .clustering import ClusteringResult, kmeans_rows, misclustering, threshold_cluster
from .diagnostics import AssumptionReport, DeviationStats, assumption_report, spectral_deviation, twoinf_deviation
from .errors import ConfigError, InvalidParameters, NumericalError
from .experiment import ExperimentConfig, TrialRecord, balance_alphas, make_theta, run_experiment
from .model import (
    DCHPPM,
    GeneralAffinity,
    Hypergraph,
    ModelParams,
    edge_probability,
    hyperdegrees,
    ordering_count,
    rank_multiset,
    sample_exact,
    sample_scalable,
    unrank_multiset,
    validate,
)
from .projection import PopulationModel, SparseSymMatrix, block_matrix, population_matrix, weighted_adjacency
from .spectral import SpectralEmbedding, leading_eigenpairs, row_normalize, sign_align

__all__ = [
    "AssumptionReport", "ClusteringResult", "ConfigError", "DCHPPM", "DeviationStats", "ExperimentConfig",
    "GeneralAffinity", "Hypergraph", "InvalidParameters", "ModelParams", "NumericalError", "PopulationModel",
    "SparseSymMatrix", "SpectralEmbedding", "TrialRecord", "assumption_report", "balance_alphas",
    "block_matrix", "edge_probability", "hyperdegrees", "kmeans_rows", "leading_eigenpairs", "make_theta",
    "misclustering", "ordering_count", "population_matrix", "rank_multiset", "row_normalize",
    "run_experiment", "sample_exact", "sample_scalable", "sign_align", "spectral_deviation",
    "threshold_cluster", "twoinf_deviation", "unrank_multiset", "validate", "weighted_adjacency",
]
