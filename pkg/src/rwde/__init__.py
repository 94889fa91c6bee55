"""Random walks in Dirichlet environment on finite digraphs.

Quenched Green functions, the min-beta integrability criterion, the Kalikow
auxiliary walk with its l1 ballisticity criterion, and the Monte Carlo
experiments around them.
"""

from .digraph import (
    Edge,
    LatticeSpec,
    QuotientResult,
    WeightedDigraph,
    beta_edges,
    boundary_edges,
    build_lattice_box,
    is_strongly_connected,
    quotient,
    simplify_multi_edges,
    unit_vectors,
    validate,
)
from .dirichlet import DirichletParams
from .environment import (
    CConstruction,
    Environment,
    GreenTable,
    QuotientEnvironment,
    construct_c,
    escape_probability,
    expected_exit_time,
    green,
    quotient_environment,
    sample_environment,
)
from .experiments import (
    FitResult,
    TailEstimate,
    TrajectoryRun,
    TrapScaling,
    fit_power_law,
    green_tail,
    simulate_zd,
    trap_probability,
)
from .integrability import (
    IntegrabilityReport,
    exit_time_report,
    lattice_report,
    min_beta_at,
    undirected_report,
    zero_speed_check,
)
from .kalikow import (
    DriftReport,
    KalikowWalk,
    ballisticity_report,
    drift_identity_check,
    kalikow_transitions,
    p_omega_delta,
)

__version__ = "0.1.0"

__all__ = [
    "Edge",
    "LatticeSpec",
    "QuotientResult",
    "WeightedDigraph",
    "beta_edges",
    "boundary_edges",
    "build_lattice_box",
    "is_strongly_connected",
    "quotient",
    "simplify_multi_edges",
    "unit_vectors",
    "validate",
    "DirichletParams",
    "CConstruction",
    "Environment",
    "GreenTable",
    "QuotientEnvironment",
    "construct_c",
    "escape_probability",
    "expected_exit_time",
    "green",
    "quotient_environment",
    "sample_environment",
    "FitResult",
    "TailEstimate",
    "TrajectoryRun",
    "TrapScaling",
    "fit_power_law",
    "green_tail",
    "simulate_zd",
    "trap_probability",
    "IntegrabilityReport",
    "exit_time_report",
    "lattice_report",
    "min_beta_at",
    "undirected_report",
    "zero_speed_check",
    "DriftReport",
    "KalikowWalk",
    "ballisticity_report",
    "drift_identity_check",
    "kalikow_transitions",
    "p_omega_delta",
]
