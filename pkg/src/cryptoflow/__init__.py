"""Transfer-network reconstruction and flow decomposition toolkit.

From raw multi-input transaction records the library builds user-level
monthly flow networks (multi-input address clustering + aggregation),
then analyzes their structure three ways: bow-tie reachability classes,
potential/circular flow splitting on the graph Laplacian, and
KL-divergence non-negative matrix factorization with coherence-based
selection of the component count.  A CLI (``cryptoflow``) drives the
same stages over CSV/JSON files.
"""

from ._kernels import BACKEND
from .bowtie import BowTieResult, TransitionTable, bowtie_decompose, transitions
from .clustering import (
    IdentityLabel,
    UserClustering,
    cluster_addresses,
    load_labels,
    rank_size,
)
from .errors import DataError, FlowError, NumericError, RecordError
from .hodge import (
    HodgeResult,
    NetFlowGraph,
    hodge_decompose,
    net_flow,
    potential_distribution,
)
from .modelsel import (
    CoherenceReport,
    SyntheticCorpus,
    coherence_arun,
    coherence_cao,
    coherence_deveaud,
    generate_lda,
    select_k,
)
from .network import (
    ActivityProfile,
    FlowNetwork,
    Period,
    UserTransfer,
    activity_profiles,
    aggregate,
    export_adjacency,
    iter_months,
    month_period,
    resolve_transfers,
    restrict,
    select_regular_users,
    snapshot_overlap,
)
from .nmf import (
    NmfModel,
    component_matrix,
    cosine_similarity_matrix,
    expand_user,
    ihh,
    joint_probability,
    nmf_fit,
    normalize,
    poisson_loglik_gap,
)
from .records import (
    TransferRecord,
    format_btc,
    format_timestamp,
    parse_btc,
    parse_timestamp,
    read_records,
    write_records_csv,
    write_records_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "ActivityProfile",
    "BowTieResult",
    "CoherenceReport",
    "DataError",
    "FlowError",
    "FlowNetwork",
    "HodgeResult",
    "IdentityLabel",
    "NetFlowGraph",
    "NmfModel",
    "NumericError",
    "Period",
    "RecordError",
    "SyntheticCorpus",
    "TransferRecord",
    "TransitionTable",
    "UserClustering",
    "UserTransfer",
    "activity_profiles",
    "aggregate",
    "bowtie_decompose",
    "cluster_addresses",
    "coherence_arun",
    "coherence_cao",
    "coherence_deveaud",
    "component_matrix",
    "cosine_similarity_matrix",
    "expand_user",
    "export_adjacency",
    "format_btc",
    "format_timestamp",
    "generate_lda",
    "hodge_decompose",
    "ihh",
    "iter_months",
    "joint_probability",
    "load_labels",
    "month_period",
    "net_flow",
    "nmf_fit",
    "normalize",
    "parse_btc",
    "parse_timestamp",
    "poisson_loglik_gap",
    "potential_distribution",
    "rank_size",
    "read_records",
    "resolve_transfers",
    "restrict",
    "select_k",
    "select_regular_users",
    "snapshot_overlap",
    "transitions",
    "write_records_csv",
    "write_records_jsonl",
]
