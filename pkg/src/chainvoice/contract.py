"""Deterministic billing state machine: accounts, bills, payments, tax records.

Bills move once from unpaid to paid. Payment must match the bill amount
exactly and moves the value from the payer's wallet to the payee's. Every
successful transaction emits exactly one event, in application order.

All operations validate fully before touching state, so a raised TxError
leaves the state byte-identical to what it was. `apply` is strictly
deterministic: identical (state, transaction, height) gives identical output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .codec import dumps_canonical
from .model import (
    ACCOUNT_ID_RE,
    MAX_AMOUNT,
    MAX_MEMO_BYTES,
    MAX_PAYLOAD_BYTES,
    PERIOD_RE,
    CreateBill,
    DocKind,
    PayBill,
    RegisterAccount,
    Role,
    TaxDocument,
    TaxRemittance,
    Transaction,
    utf8_len,
)

UNPAID = "unpaid"
PAID = "paid"


class TxError(Exception):
    """A rejected transaction; the state it was applied to is unchanged."""

    @property
    def code(self) -> str:
        return type(self).__name__


class DuplicateAccount(TxError):
    pass


class UnknownAccount(TxError):
    pass


class InvalidAccountId(TxError):
    pass


class InvalidAmount(TxError):
    pass


class MemoTooLong(TxError):
    pass


class PayloadTooLong(TxError):
    pass


class InvalidPeriod(TxError):
    pass


class UnknownBill(TxError):
    pass


class AlreadyPaid(TxError):
    pass


class AmountMismatch(TxError):
    pass


class InsufficientFunds(TxError):
    pass


@dataclass(slots=True)
class Account:
    account_id: str
    role: Role
    balance: int

    def clone(self) -> "Account":
        return Account(self.account_id, self.role, self.balance)


@dataclass(slots=True)
class Bill:
    bill_id: int
    payee: str
    amount: int
    tax_amount: int
    memo: str
    status: str
    payer: str | None
    created_at_height: int
    paid_at_height: int | None

    def clone(self) -> "Bill":
        return Bill(
            self.bill_id,
            self.payee,
            self.amount,
            self.tax_amount,
            self.memo,
            self.status,
            self.payer,
            self.created_at_height,
            self.paid_at_height,
        )


@dataclass(frozen=True, slots=True)
class AccountRegistered:
    account_id: str
    role: Role


@dataclass(frozen=True, slots=True)
class BillCreated:
    bill_id: int
    payee: str
    amount: int
    memo: str


@dataclass(frozen=True, slots=True)
class BillPaid:
    bill_id: int
    payer: str
    value: int


@dataclass(frozen=True, slots=True)
class TaxRemitted:
    seller: str
    amount: int
    period: str


@dataclass(frozen=True, slots=True)
class TaxDocumentFiled:
    kind: DocKind
    subject: str


Event = AccountRegistered | BillCreated | BillPaid | TaxRemitted | TaxDocumentFiled


def event_to_json(event: Event) -> dict:
    if isinstance(event, AccountRegistered):
        return {"type": "AccountRegistered", "account_id": event.account_id, "role": event.role.value}
    if isinstance(event, BillCreated):
        return {
            "type": "BillCreated",
            "bill_id": event.bill_id,
            "payee": event.payee,
            "amount": event.amount,
            "memo": event.memo,
        }
    if isinstance(event, BillPaid):
        return {"type": "BillPaid", "bill_id": event.bill_id, "payer": event.payer, "value": event.value}
    if isinstance(event, TaxRemitted):
        return {"type": "TaxRemitted", "seller": event.seller, "amount": event.amount, "period": event.period}
    return {"type": "TaxDocumentFiled", "kind": event.kind.value, "subject": event.subject}


class ContractState:
    """Mutable ledger-application state; share across threads read-only."""

    __slots__ = ("bill_counter", "bills", "accounts", "event_log")

    def __init__(self) -> None:
        self.bill_counter: int = 0
        self.bills: dict[int, Bill] = {}
        self.accounts: dict[str, Account] = {}
        self.event_log: list[Event] = []

    def clone(self) -> "ContractState":
        other = ContractState()
        other.bill_counter = self.bill_counter
        other.bills = {k: v.clone() for k, v in self.bills.items()}
        other.accounts = {k: v.clone() for k, v in self.accounts.items()}
        other.event_log = list(self.event_log)
        return other

    def total_balance(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    # --- transitions ---------------------------------------------------

    def register_account(self, account_id: str, role: Role, initial_balance: int) -> AccountRegistered:
        if not ACCOUNT_ID_RE.match(account_id):
            raise InvalidAccountId(f"account_id must match [a-z0-9_-]{{1,64}}: {account_id!r}")
        if account_id in self.accounts:
            raise DuplicateAccount(f"account already registered: {account_id}")
        if not 0 <= initial_balance <= MAX_AMOUNT:
            raise InvalidAmount(f"initial_balance out of range: {initial_balance}")
        self.accounts[account_id] = Account(account_id, role, initial_balance)
        event = AccountRegistered(account_id, role)
        self.event_log.append(event)
        return event

    def create_bill(
        self, payee: str, amount: int, tax_amount: int, memo: str, height: int
    ) -> tuple[int, BillCreated]:
        if payee not in self.accounts:
            raise UnknownAccount(f"payee not registered: {payee}")
        if not 0 < amount <= MAX_AMOUNT:
            raise InvalidAmount(f"amount must be positive: {amount}")
        if not 0 <= tax_amount <= amount:
            raise InvalidAmount(f"tax_amount must be within [0, amount]: {tax_amount}")
        if utf8_len(memo) > MAX_MEMO_BYTES:
            raise MemoTooLong(f"memo exceeds {MAX_MEMO_BYTES} bytes")
        self.bill_counter += 1
        bill_id = self.bill_counter
        self.bills[bill_id] = Bill(
            bill_id=bill_id,
            payee=payee,
            amount=amount,
            tax_amount=tax_amount,
            memo=memo,
            status=UNPAID,
            payer=None,
            created_at_height=height,
            paid_at_height=None,
        )
        event = BillCreated(bill_id, payee, amount, memo)
        self.event_log.append(event)
        return bill_id, event

    def pay_bill(self, bill_id: int, payer: str, value: int, height: int) -> BillPaid:
        """Checks run in fixed order: existence, unpaid, amount equality, funds."""
        bill = self.bills.get(bill_id)
        if bill is None:
            raise UnknownBill(f"no such bill: {bill_id}")
        if bill.status == PAID:
            raise AlreadyPaid(f"bill {bill_id} is already paid")
        if value != bill.amount:
            raise AmountMismatch(f"bill {bill_id} amount is {bill.amount}, got {value}")
        payer_account = self.accounts.get(payer)
        if payer_account is None:
            raise UnknownAccount(f"payer not registered: {payer}")
        if payer_account.balance < value:
            raise InsufficientFunds(f"payer {payer} balance {payer_account.balance} < {value}")
        payer_account.balance -= value
        self.accounts[bill.payee].balance += value
        bill.status = PAID
        bill.payer = payer
        bill.paid_at_height = height
        event = BillPaid(bill_id, payer, value)
        self.event_log.append(event)
        return event

    def remit_tax(self, seller: str, amount: int, period: str) -> TaxRemitted:
        # a remittance records money sent to the government off-ledger; it
        # never moves wallet balances
        if seller not in self.accounts:
            raise UnknownAccount(f"seller not registered: {seller}")
        if not 0 < amount <= MAX_AMOUNT:
            raise InvalidAmount(f"remittance amount must be positive: {amount}")
        if not PERIOD_RE.match(period):
            raise InvalidPeriod(f"period must be YYYY-MM: {period!r}")
        event = TaxRemitted(seller, amount, period)
        self.event_log.append(event)
        return event

    def file_document(self, kind: DocKind, subject: str, payload: str) -> TaxDocumentFiled:
        if subject not in self.accounts:
            raise UnknownAccount(f"subject not registered: {subject}")
        if utf8_len(payload) > MAX_PAYLOAD_BYTES:
            raise PayloadTooLong(f"payload exceeds {MAX_PAYLOAD_BYTES} bytes")
        event = TaxDocumentFiled(kind, subject)
        self.event_log.append(event)
        return event

    def query_bill(self, bill_id: int) -> Bill:
        bill = self.bills.get(bill_id)
        if bill is None:
            raise UnknownBill(f"no such bill: {bill_id}")
        return bill

    # --- snapshot ------------------------------------------------------

    def snapshot(self) -> dict:
        """Interchange snapshot: {bill_counter, bills, accounts}, maps keyed by id."""
        return {
            "bill_counter": self.bill_counter,
            "bills": {
                str(b.bill_id): {
                    "bill_id": b.bill_id,
                    "payee": b.payee,
                    "amount": b.amount,
                    "tax_amount": b.tax_amount,
                    "memo": b.memo,
                    "status": b.status,
                    "payer": b.payer,
                    "created_at_height": b.created_at_height,
                    "paid_at_height": b.paid_at_height,
                }
                for b in self.bills.values()
            },
            "accounts": {
                str(a.account_id): {
                    "account_id": a.account_id,
                    "role": a.role.value,
                    "balance": a.balance,
                }
                for a in self.accounts.values()
            },
        }

    def state_digest(self) -> str:
        """SHA-256 over the canonical snapshot JSON (sorted keys, no whitespace)."""
        return hashlib.sha256(dumps_canonical(self.snapshot()).encode("utf-8")).hexdigest()


def apply_transaction(state: ContractState, tx: Transaction, height: int) -> list[Event]:
    """Apply one decoded transaction at the given block height.

    Raises a TxError subclass on rejection, leaving `state` untouched; on
    success mutates `state` and returns the emitted events.
    """
    if isinstance(tx, RegisterAccount):
        return [state.register_account(tx.account_id, tx.role, tx.initial_balance)]
    if isinstance(tx, CreateBill):
        _, event = state.create_bill(tx.payee, tx.amount, tx.tax_amount, tx.memo, height)
        return [event]
    if isinstance(tx, PayBill):
        return [state.pay_bill(tx.bill_id, tx.payer, tx.value, height)]
    if isinstance(tx, TaxRemittance):
        return [state.remit_tax(tx.seller, tx.amount, tx.period)]
    if isinstance(tx, TaxDocument):
        return [state.file_document(tx.kind, tx.subject, tx.payload)]
    raise TxError(f"unknown transaction type: {type(tx).__name__}")


def replay_chain(blocks) -> ContractState:
    """Rebuild contract state by applying every block's transactions in order."""
    state = ContractState()
    for block in blocks:
        for tx in block.transactions:
            apply_transaction(state, tx, block.height)
    return state
