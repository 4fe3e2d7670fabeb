"""Near-uniform random graphs and approximate counts for a prescribed degree sequence."""

from .degrees import (
    DegreeSequence,
    DegreeSequenceError,
    DegreeTooLarge,
    NotGraphical,
    OddSum,
    lambda_bar,
    mckay_log_count,
    regime_check,
    validate_graphical,
)
from .estimators import (
    AllTrialsFailed,
    CountEstimate,
    EdgeSetMismatch,
    ProbEstimate,
    count_graphs,
    generate_fast,
    generate_uniform,
    procedure_b,
)
from .oracle import (
    InstanceTooLarge,
    UnknownGraph,
    brute_force_count,
    chi_square_uniformity,
    count_graphs_exact,
    enumerate_graphs,
    exact_distribution,
)
from .sampler import FailureDetected, GraphSample, SamplerState, sample, verify_graph

__version__ = "0.1.0"

__all__ = [
    "AllTrialsFailed",
    "CountEstimate",
    "DegreeSequence",
    "DegreeSequenceError",
    "DegreeTooLarge",
    "EdgeSetMismatch",
    "FailureDetected",
    "GraphSample",
    "InstanceTooLarge",
    "NotGraphical",
    "OddSum",
    "ProbEstimate",
    "SamplerState",
    "UnknownGraph",
    "brute_force_count",
    "chi_square_uniformity",
    "count_graphs",
    "count_graphs_exact",
    "enumerate_graphs",
    "exact_distribution",
    "generate_fast",
    "generate_uniform",
    "lambda_bar",
    "mckay_log_count",
    "procedure_b",
    "regime_check",
    "sample",
    "validate_graphical",
    "verify_graph",
]
