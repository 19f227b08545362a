"""Shared fixtures: canonical sample transactions and seeded chain builders."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chainvoice.contract import ContractState, apply_transaction
from chainvoice.ledger import Chain, append_block, new_chain
from chainvoice.model import (
    CreateBill,
    DocKind,
    PayBill,
    RegisterAccount,
    Role,
    TaxDocument,
    TaxRemittance,
)

# 2025-01-15 00:00:00 UTC; a mid-month anchor so random offsets span months
T0 = 1736899200
DAY = 86400


@pytest.fixture
def sample_txs():
    return [
        RegisterAccount("s1", Role.SHOPKEEPER, 0),
        CreateBill("s1", 1000, 180, "rice 5kg"),
        PayBill(1, "c1", 1000),
        TaxRemittance("s1", 180, "2025-01"),
        TaxDocument(DocKind.SHOW_CAUSE_NOTICE, "s1", "late remittance"),
    ]


def base_accounts() -> list[RegisterAccount]:
    return [
        RegisterAccount("s1", Role.SHOPKEEPER, 0),
        RegisterAccount("s2", Role.SHOPKEEPER, 0),
        RegisterAccount("c1", Role.CUSTOMER, 100_000),
        RegisterAccount("c2", Role.CUSTOMER, 100_000),
        RegisterAccount("state1", Role.STATE_TAX_AUTHORITY, 0),
        RegisterAccount("central1", Role.CENTRAL_TAX_AUTHORITY, 0),
        RegisterAccount("aud1", Role.OTHER_AUTHORITY, 0),
    ]


def build_chain(batches: list[tuple[int, list]], genesis_ts: int = 0) -> Chain:
    """Chain from (timestamp, txs) batches; every tx must apply cleanly."""
    chain = new_chain("test", genesis_ts)
    state = ContractState()
    for timestamp, txs in batches:
        for tx in txs:
            apply_transaction(state, tx, chain.tip.height + 1)
        chain = append_block(chain, txs, "test-node", timestamp)
    return chain


def random_activity_chain(
    seed: int,
    bills: int | None = None,
    remits: int | None = None,
    extra_accounts: int = 0,
    extra_docs: int = 4,
) -> Chain:
    """Seeded chain of registrations, bills, payments, remittances, documents.

    Block 1 registers the cast; later blocks carry a few transactions each.
    Every transaction applies cleanly and timestamps walk forward across
    month boundaries, exercising period attribution.
    """
    rng = random.Random(seed)
    n_bills = rng.randrange(5, 51) if bills is None else bills
    n_remits = rng.randrange(0, 21) if remits is None else remits

    accounts = base_accounts()
    for i in range(extra_accounts):
        role = rng.choice([Role.SHOPKEEPER, Role.CUSTOMER])
        accounts.append(RegisterAccount(f"x{i}", role, 50_000))
    shopkeepers = [a.account_id for a in accounts if a.role is Role.SHOPKEEPER]
    customers = [a.account_id for a in accounts if a.role is Role.CUSTOMER]
    everyone = [a.account_id for a in accounts]
    periods = ["2025-01", "2025-02", "2025-03"]

    # flat to-do list of non-payment actions, dealt into blocks below
    todo: list = []
    for i in range(n_bills):
        amount = rng.randrange(100, 5000)
        todo.append(
            CreateBill(rng.choice(shopkeepers), amount, rng.randrange(0, amount + 1), f"item-{i}")
        )
    for _ in range(n_remits):
        todo.append(
            TaxRemittance(rng.choice(shopkeepers), rng.randrange(1, 600), rng.choice(periods))
        )
    for i in range(extra_docs):
        todo.append(TaxDocument(rng.choice(list(DocKind)), rng.choice(everyone), f"doc-{i}"))
    rng.shuffle(todo)

    chain = new_chain("test", T0)
    state = ContractState()
    timestamp = T0

    def seal(txs: list) -> None:
        nonlocal chain, timestamp
        timestamp += rng.randrange(0, 4 * DAY)
        for tx in txs:
            apply_transaction(state, tx, chain.tip.height + 1)
        chain = append_block(chain, txs, "test-node", timestamp)

    seal(list(accounts))

    unpaid: list[tuple[int, int]] = []  # (bill_id, amount)
    while todo or unpaid:
        batch: list = []
        creates_in_batch = 0
        for _ in range(rng.randrange(1, 6)):
            pay_now = unpaid and (not todo or rng.random() < 0.4)
            if pay_now:
                bill_id, amount = unpaid.pop(rng.randrange(len(unpaid)))
                if rng.random() < 0.15:
                    continue  # this bill stays unpaid forever
                batch.append(PayBill(bill_id, rng.choice(customers), amount))
            elif todo:
                action = todo.pop()
                batch.append(action)
                if isinstance(action, CreateBill):
                    # ids are sequential, so the id is known before applying
                    creates_in_batch += 1
                    unpaid.append((state.bill_counter + creates_in_batch, action.amount))
        if batch:
            seal(batch)
    return chain
