"""chainvoice: a tamper-evident invoice ledger with role-scoped tax auditing,
a deterministic replication simulator, and an HTTP/JSON service."""

__version__ = "0.1.0"

from .contract import ContractState, apply_transaction, replay_chain
from .ledger import (
    Chain,
    Block,
    Violation,
    append_block,
    compute_tx_root,
    genesis,
    new_chain,
    validate_chain,
)
from .model import (
    CreateBill,
    DocKind,
    PayBill,
    RegisterAccount,
    Role,
    TaxDocument,
    TaxRemittance,
)
from .views import flag_evasion, tax_report, visible_records

__all__ = [
    "__version__",
    "Chain",
    "Block",
    "Violation",
    "append_block",
    "compute_tx_root",
    "genesis",
    "new_chain",
    "validate_chain",
    "ContractState",
    "apply_transaction",
    "replay_chain",
    "Role",
    "DocKind",
    "RegisterAccount",
    "CreateBill",
    "PayBill",
    "TaxRemittance",
    "TaxDocument",
    "flag_evasion",
    "tax_report",
    "visible_records",
]
