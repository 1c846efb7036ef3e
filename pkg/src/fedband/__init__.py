"""Federated phase-based elimination bandits over hierarchical partitions of [0,1]^d.

Simulates M clients running synchronous phase-wise elimination on a binary
partition tree, mixing local and federated reward estimates by a weight
alpha, with full regret and communication accounting.
"""

from .federation import (
    DEFAULT_CONF_C,
    ClientMode,
    ClientState,
    EliminationDecision,
    FederationError,
    PullBlock,
    advance,
    build_estimate_upload,
    confidence_radius,
    eliminate,
    exploit_node,
    local_estimates,
    make_client,
    mix_estimates,
    phase_budget,
    plan_schedule,
    pull_counts,
    record_pull,
    record_pull_block,
    sample_count_bound,
    server_aggregate,
    server_begin_phase,
    stopping_depth,
    terminal_action,
)
from .harness import (
    AlphaSweepTable,
    ConfigError,
    HarnessError,
    ReplicationSummary,
    RunInvariantError,
    RunResult,
    SimConfig,
    SweepRow,
    VERSION,
    emit,
    oracle_command,
    replicate,
    run,
    sweep_alpha,
)
from .objectives import (
    BASE_FUNCTIONS,
    NearOptimalityEstimate,
    NoiseModel,
    ObjectiveError,
    ObjectiveSuite,
    OracleReport,
    client_shifts,
    double_sine,
    estimate_near_optimality_dimension,
    garland,
    modulate,
    oracle_optima,
    personalized_value,
    sample_reward,
)
from .partition import (
    Cell,
    NodeId,
    PartitionError,
    PartitionSpec,
    canonical_order,
    cell,
    children,
    default_constants,
    diameter,
    locate,
    midpoint,
    midpoint_1d,
    parent,
    root,
    sibling,
)
from .protocol import (
    ActiveSetUpload,
    CommLedger,
    EstimateUpload,
    GlobalEstimateBroadcast,
    PhaseBroadcast,
    PhaseComm,
    PrivacyViolation,
    ProtocolError,
    decode,
    encode,
    message_from_dict,
    message_to_dict,
    scalar_size,
    validate_privacy,
    write_transcript,
)

__version__ = VERSION

__all__ = [
    "ActiveSetUpload",
    "AlphaSweepTable",
    "BASE_FUNCTIONS",
    "Cell",
    "ClientMode",
    "ClientState",
    "CommLedger",
    "ConfigError",
    "DEFAULT_CONF_C",
    "EliminationDecision",
    "EstimateUpload",
    "FederationError",
    "GlobalEstimateBroadcast",
    "HarnessError",
    "NearOptimalityEstimate",
    "NodeId",
    "NoiseModel",
    "ObjectiveError",
    "ObjectiveSuite",
    "OracleReport",
    "PartitionError",
    "PartitionSpec",
    "PhaseBroadcast",
    "PhaseComm",
    "PrivacyViolation",
    "ProtocolError",
    "PullBlock",
    "ReplicationSummary",
    "RunInvariantError",
    "RunResult",
    "SimConfig",
    "SweepRow",
    "VERSION",
    "advance",
    "build_estimate_upload",
    "canonical_order",
    "cell",
    "children",
    "client_shifts",
    "confidence_radius",
    "decode",
    "default_constants",
    "diameter",
    "double_sine",
    "eliminate",
    "emit",
    "encode",
    "estimate_near_optimality_dimension",
    "exploit_node",
    "garland",
    "local_estimates",
    "locate",
    "make_client",
    "message_from_dict",
    "message_to_dict",
    "midpoint",
    "midpoint_1d",
    "mix_estimates",
    "modulate",
    "oracle_command",
    "oracle_optima",
    "parent",
    "personalized_value",
    "phase_budget",
    "plan_schedule",
    "pull_counts",
    "record_pull",
    "record_pull_block",
    "replicate",
    "root",
    "run",
    "sample_count_bound",
    "sample_reward",
    "scalar_size",
    "server_aggregate",
    "server_begin_phase",
    "sibling",
    "stopping_depth",
    "sweep_alpha",
    "terminal_action",
    "validate_privacy",
    "write_transcript",
]
