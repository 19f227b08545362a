"""Core domain values: roles, document kinds, and the recordable transaction union.

Every action the ledger can record is one of five transaction variants. All
money fields are integers in minor currency units; amounts never use floats.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

ZERO_DIGEST = b"\x00" * 32
DIGEST_LEN = 32

MAX_MEMO_BYTES = 256
MAX_PAYLOAD_BYTES = 4096
# JSON interchange uses plain numbers; keep every stored integer exactly
# representable in an IEEE double.
MAX_AMOUNT = 2**53 - 1

ACCOUNT_ID_RE = re.compile(r"^[a-z0-9_-]{1,64}$")
PERIOD_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")

REDACTED = "[REDACTED]"


class Role(enum.Enum):
    SHOPKEEPER = "shopkeeper"
    CUSTOMER = "customer"
    STATE_TAX_AUTHORITY = "state_tax_authority"
    CENTRAL_TAX_AUTHORITY = "central_tax_authority"
    OTHER_AUTHORITY = "other_authority"


AUTHORITY_ROLES = frozenset(
    {Role.STATE_TAX_AUTHORITY, Role.CENTRAL_TAX_AUTHORITY, Role.OTHER_AUTHORITY}
)
FULL_VIEW_ROLES = frozenset({Role.STATE_TAX_AUTHORITY, Role.CENTRAL_TAX_AUTHORITY})


class DocKind(enum.Enum):
    REGISTRATION = "registration"
    ANNUAL_RETURN = "annual_return"
    PAYMENT = "payment"
    SHOW_CAUSE_NOTICE = "show_cause_notice"
    ORDER = "order"


@dataclass(frozen=True, slots=True)
class RegisterAccount:
    account_id: str
    role: Role
    initial_balance: int


@dataclass(frozen=True, slots=True)
class CreateBill:
    payee: str
    amount: int
    tax_amount: int
    memo: str


@dataclass(frozen=True, slots=True)
class PayBill:
    bill_id: int
    payer: str
    value: int


@dataclass(frozen=True, slots=True)
class TaxRemittance:
    seller: str
    amount: int
    period: str


@dataclass(frozen=True, slots=True)
class TaxDocument:
    kind: DocKind
    subject: str
    payload: str


Transaction = RegisterAccount | CreateBill | PayBill | TaxRemittance | TaxDocument

TX_TYPES: tuple[type, ...] = (RegisterAccount, CreateBill, PayBill, TaxRemittance, TaxDocument)


def tx_type_name(tx: Transaction) -> str:
    return type(tx).__name__


def utf8_len(s: str) -> int:
    return len(s.encode("utf-8"))
