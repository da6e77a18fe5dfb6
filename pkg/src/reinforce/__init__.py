"""Reinforce synchronous routing networks against random node faults by replication."""

from .errors import ContractError, InvalidArgument, InvalidPartition, ParseError, ReinforceError
from .graph import GridSpec, Network, load_network, make_grid, make_path, save_network
from .partition import (
    Partition,
    PartitionStats,
    hypercube_partition,
    load_partition,
    path_partition,
    save_partition,
    validate_partition,
)
from .reinforcement import (
    CopyId,
    Kind,
    Metrics,
    Mode,
    ReinforcedNetwork,
    build_partitioned,
    build_strong,
    copies_of,
    metrics,
    project,
)
from .routing import (
    EnvSchedule,
    Injection,
    dimension_order_scheme,
    flooding_scheme,
    pipeline_scheme,
)
from .faults import (
    BOT,
    FaultModel,
    FaultSet,
    Verdict,
    check,
    parse_adversary,
    precondition_holds,
    run_reference,
    run_simulation,
    sample_faults,
)
from .analysis import (
    ExperimentConfig,
    SweepRow,
    enumerate_exact,
    exact_failure_exponent,
    exact_precondition_probability,
    monte_carlo,
    slope_fit,
    toy_bound_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BOT",
    "ContractError",
    "CopyId",
    "EnvSchedule",
    "ExperimentConfig",
    "FaultModel",
    "FaultSet",
    "GridSpec",
    "Injection",
    "InvalidArgument",
    "InvalidPartition",
    "Kind",
    "Metrics",
    "Mode",
    "Network",
    "ParseError",
    "Partition",
    "PartitionStats",
    "ReinforceError",
    "ReinforcedNetwork",
    "SweepRow",
    "Verdict",
    "build_partitioned",
    "build_strong",
    "check",
    "copies_of",
    "dimension_order_scheme",
    "enumerate_exact",
    "exact_failure_exponent",
    "exact_precondition_probability",
    "flooding_scheme",
    "hypercube_partition",
    "load_network",
    "load_partition",
    "make_grid",
    "make_path",
    "metrics",
    "monte_carlo",
    "parse_adversary",
    "path_partition",
    "pipeline_scheme",
    "precondition_holds",
    "project",
    "run_reference",
    "run_simulation",
    "sample_faults",
    "save_network",
    "save_partition",
    "slope_fit",
    "toy_bound_experiment",
    "validate_partition",
]
