"""Role-scoped read views over the chain, plus the tax aggregation that makes
evasion computable.

The policy table gives every (role, transaction kind) pair exactly one rule:

* state and central tax authorities see every record, unredacted
* other authorities see every tax document plus bill records with the memo
  replaced by the redaction sentinel; they see no registrations or remittances
* a shopkeeper sees records about itself: its registration, bills payable to
  it, payments touching its bills, its remittances, documents naming it
* a customer sees its registration, its own payments, bills it paid plus any
  still-unpaid bill (the payable universe it can settle), and the remittance
  records of sellers it has paid - which is what lets it check that the tax
  it handed over was actually passed on

Tax reports attribute a paid bill to the month of the block that recorded the
payment (UTC), since remittance is owed on money received; remittances carry
their period explicitly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum

from .contract import PAID, ContractState, TxError, UnknownAccount, replay_chain
from .ledger import Chain
from .model import (
    REDACTED,
    CreateBill,
    PayBill,
    RegisterAccount,
    Role,
    TaxDocument,
    TaxRemittance,
    Transaction,
)


class RoleMismatch(TxError):
    """Claimed role differs from the role registered on chain."""


class NotAShopkeeper(TxError):
    pass


class Rule(Enum):
    ALL = "all"
    OWN_ONLY = "own_only"
    NONE = "none"


TxKind = type

_KINDS: tuple[type, ...] = (RegisterAccount, CreateBill, PayBill, TaxRemittance, TaxDocument)


@dataclass(frozen=True)
class ViewPolicy:
    """Visibility rule and redacted fields per transaction kind for one role."""

    role: Role
    rules: dict[TxKind, Rule]
    redact: dict[TxKind, tuple[str, ...]]

    def __post_init__(self) -> None:
        missing = [k.__name__ for k in _KINDS if k not in self.rules]
        if missing:
            raise ValueError(f"policy for {self.role.value} missing rules: {missing}")


def _policy(role: Role, rules: dict[TxKind, Rule], redact: dict[TxKind, tuple[str, ...]] | None = None) -> ViewPolicy:
    return ViewPolicy(role=role, rules=rules, redact=redact or {})


_ALL = {k: Rule.ALL for k in _KINDS}
_OWN = {k: Rule.OWN_ONLY for k in _KINDS}

POLICY_TABLE: dict[Role, ViewPolicy] = {
    Role.STATE_TAX_AUTHORITY: _policy(Role.STATE_TAX_AUTHORITY, dict(_ALL)),
    Role.CENTRAL_TAX_AUTHORITY: _policy(Role.CENTRAL_TAX_AUTHORITY, dict(_ALL)),
    Role.OTHER_AUTHORITY: _policy(
        Role.OTHER_AUTHORITY,
        {
            RegisterAccount: Rule.NONE,
            CreateBill: Rule.ALL,
            PayBill: Rule.ALL,
            TaxRemittance: Rule.NONE,
            TaxDocument: Rule.ALL,
        },
        {CreateBill: ("memo",)},
    ),
    Role.SHOPKEEPER: _policy(Role.SHOPKEEPER, dict(_OWN)),
    Role.CUSTOMER: _policy(
        Role.CUSTOMER,
        {
            RegisterAccount: Rule.OWN_ONLY,
            CreateBill: Rule.OWN_ONLY,
            PayBill: Rule.OWN_ONLY,
            TaxRemittance: Rule.OWN_ONLY,
            TaxDocument: Rule.NONE,
        },
    ),
}


@dataclass(frozen=True, slots=True)
class TaxReport:
    seller: str
    period: str
    tax_collected: int
    tax_remitted: int
    discrepancy: int
    bill_ids: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "seller": self.seller,
            "period": self.period,
            "tax_collected": self.tax_collected,
            "tax_remitted": self.tax_remitted,
            "discrepancy": self.discrepancy,
            "bill_ids": list(self.bill_ids),
        }


def period_of_timestamp(timestamp: int) -> str:
    """UTC month of a unix timestamp, as YYYY-MM."""
    t = time.gmtime(timestamp)
    return f"{t.tm_year:04d}-{t.tm_mon:02d}"


class ViewContext:
    """Final chain state plus the derived lookups the own-record rules need."""

    def __init__(self, chain: Chain | None = None, state: ContractState | None = None):
        if state is None:
            if chain is None:
                raise ValueError("a chain or a state is required")
            state = replay_chain(chain.blocks)
        self.state = state
        self.sellers_paid_by: dict[str, set[str]] = {}
        for bill in self.state.bills.values():
            if bill.status == PAID and bill.payer is not None:
                self.sellers_paid_by.setdefault(bill.payer, set()).add(bill.payee)

    @classmethod
    def from_state(cls, state: ContractState) -> "ViewContext":
        return cls(state=state)


def is_own_record(
    viewer: str, role: Role, tx: Transaction, ctx: ViewContext, bill_id: int | None
) -> bool:
    """Own-record predicate; bill_id is the id a CreateBill received (by creation order)."""
    if isinstance(tx, RegisterAccount):
        return tx.account_id == viewer
    if isinstance(tx, CreateBill):
        if role is Role.SHOPKEEPER:
            return tx.payee == viewer
        # customers: bills they settled, plus any bill still open for payment
        bill = ctx.state.bills.get(bill_id) if bill_id is not None else None
        if bill is None:
            return False
        return bill.payer == viewer or bill.status != PAID
    if isinstance(tx, PayBill):
        if tx.payer == viewer:
            return True
        if role is Role.SHOPKEEPER:
            bill = ctx.state.bills.get(tx.bill_id)
            return bill is not None and bill.payee == viewer
        return False
    if isinstance(tx, TaxRemittance):
        if role is Role.SHOPKEEPER:
            return tx.seller == viewer
        return tx.seller in ctx.sellers_paid_by.get(viewer, ())
    if isinstance(tx, TaxDocument):
        return tx.subject == viewer
    return False


def _redact(tx: Transaction, fields: tuple[str, ...]) -> Transaction:
    if not fields:
        return tx
    return replace(tx, **{f: REDACTED for f in fields})


def visible_records(
    chain: Chain, viewer: str, role: Role
) -> list[tuple[int, Transaction]]:
    """Exactly the records the policy admits for this viewer, in chain order.

    Raises UnknownAccount if the viewer is not registered on the chain and
    RoleMismatch if the claimed role differs from the registered one.
    """
    ctx = ViewContext(chain)
    account = ctx.state.accounts.get(viewer)
    if account is None:
        raise UnknownAccount(f"viewer not registered: {viewer}")
    if account.role is not role:
        raise RoleMismatch(
            f"{viewer} is registered as {account.role.value}, not {role.value}"
        )
    policy = POLICY_TABLE[role]

    out: list[tuple[int, Transaction]] = []
    create_seq = 0
    for block in chain.blocks:
        for tx in block.transactions:
            if isinstance(tx, CreateBill):
                create_seq += 1
                bill_id: int | None = create_seq
            else:
                bill_id = None
            rule = policy.rules[type(tx)]
            if rule is Rule.NONE:
                continue
            if rule is Rule.OWN_ONLY and not is_own_record(viewer, role, tx, ctx, bill_id):
                continue
            out.append((block.height, _redact(tx, policy.redact.get(type(tx), ()))))
    return out


def tax_report(chain: Chain, seller: str, period: str) -> TaxReport:
    """Collected-vs-remitted tax for one shopkeeper and one YYYY-MM period.

    tax_collected sums tax_amount over the seller's bills paid in blocks whose
    timestamp falls in the period; tax_remitted sums the seller's remittance
    records declaring that period.
    """
    state = replay_chain(chain.blocks)
    account = state.accounts.get(seller)
    if account is None:
        raise UnknownAccount(f"seller not registered: {seller}")
    if account.role is not Role.SHOPKEEPER:
        raise NotAShopkeeper(f"{seller} is registered as {account.role.value}")

    collected = 0
    bill_ids: list[int] = []
    for bill in state.bills.values():
        if bill.payee != seller or bill.status != PAID or bill.paid_at_height is None:
            continue
        paid_ts = chain.blocks[bill.paid_at_height].timestamp
        if period_of_timestamp(paid_ts) == period:
            collected += bill.tax_amount
            bill_ids.append(bill.bill_id)

    remitted = 0
    for block in chain.blocks:
        for tx in block.transactions:
            if isinstance(tx, TaxRemittance) and tx.seller == seller and tx.period == period:
                remitted += tx.amount

    return TaxReport(
        seller=seller,
        period=period,
        tax_collected=collected,
        tax_remitted=remitted,
        discrepancy=collected - remitted,
        bill_ids=tuple(sorted(bill_ids)),
    )


def flag_evasion(chain: Chain, period: str) -> list[tuple[str, int]]:
    """Shopkeepers whose period discrepancy is strictly positive.

    Sorted by discrepancy descending, ties by account_id ascending.
    """
    state = replay_chain(chain.blocks)
    flagged = []
    for account_id, account in state.accounts.items():
        if account.role is not Role.SHOPKEEPER:
            continue
        report = tax_report(chain, account_id, period)
        if report.discrepancy > 0:
            flagged.append((account_id, report.discrepancy))
    flagged.sort(key=lambda item: (-item[1], item[0]))
    return flagged


def flags_to_json(flags: list[tuple[str, int]]) -> list[dict]:
    return [{"seller": seller, "discrepancy": discrepancy} for seller, discrepancy in flags]
