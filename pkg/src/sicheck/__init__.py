"""sicheck: black-box snapshot isolation checking for transactional histories."""

from .errors import (
    BudgetExceededError,
    DanglingReadError,
    FormatError,
    LimitExceededError,
    MissingSupportError,
    ReservedValueError,
    SicheckError,
    UniqueValueError,
    UnsupportedShapeError,
)
from .histories import (
    History,
    Operation,
    Transaction,
    completeness_gate,
    effective_reads_writes,
    parse_history,
    serialize_history,
)
from .oracle import OracleLimits, oracle_check
from .pipeline import Verdict, check_si
from .workload import WorkloadParams, generate, inject

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError",
    "DanglingReadError",
    "FormatError",
    "History",
    "LimitExceededError",
    "MissingSupportError",
    "Operation",
    "OracleLimits",
    "ReservedValueError",
    "SicheckError",
    "Transaction",
    "UniqueValueError",
    "UnsupportedShapeError",
    "Verdict",
    "WorkloadParams",
    "check_si",
    "completeness_gate",
    "effective_reads_writes",
    "generate",
    "inject",
    "oracle_check",
    "parse_history",
    "serialize_history",
    "__version__",
]
