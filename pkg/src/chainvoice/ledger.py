"""Append-only hash-chained block ledger.

A chain is a sequence of blocks with consecutive heights, each linked to its
predecessor by hash. Block hashes cover a canonical header encoding and the
header commits to a Merkle root over the canonical transaction encodings, so
any post-hoc byte change to recorded data is detectable by revalidation.
Chains are immutable values: appending yields a new chain.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

from .codec import encode_block_header, tx_hash
from .model import ZERO_DIGEST, Transaction

GENESIS_PROPOSER = "genesis"


class LedgerError(Exception):
    pass


class NonMonotonicTimestamp(LedgerError):
    """Appending with a timestamp earlier than the current tip's."""


class EmptyChain(LedgerError):
    """Validation requires at least the genesis block."""


class ViolationReason(enum.Enum):
    HASH_MISMATCH = "hash_mismatch"
    LINK_BROKEN = "link_broken"
    HEIGHT_GAP = "height_gap"
    ROOT_MISMATCH = "root_mismatch"
    TIMESTAMP_REGRESSION = "timestamp_regression"


@dataclass(frozen=True, slots=True)
class Violation:
    height: int
    reason: ViolationReason


@dataclass(frozen=True, slots=True)
class Block:
    height: int
    timestamp: int
    prev_hash: bytes
    tx_root: bytes
    transactions: tuple[Transaction, ...]
    proposer: str
    block_hash: bytes


@dataclass(frozen=True, slots=True)
class Chain:
    blocks: tuple[Block, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]


def compute_tx_root(transactions: list[Transaction] | tuple[Transaction, ...]) -> bytes:
    """Binary Merkle root over sha256 of each canonical transaction encoding.

    The empty list yields the all-zero digest; a single leaf is promoted
    directly; an odd node count at any level duplicates the last node.
    """
    if not transactions:
        return ZERO_DIGEST
    level = [tx_hash(tx) for tx in transactions]
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [
            hashlib.sha256(level[i] + level[i + 1]).digest() for i in range(0, len(level), 2)
        ]
    return level[0]


def compute_block_hash(
    height: int, timestamp: int, prev_hash: bytes, tx_root: bytes, proposer: str
) -> bytes:
    return hashlib.sha256(
        encode_block_header(height, timestamp, prev_hash, tx_root, proposer)
    ).digest()


def make_block(
    height: int,
    timestamp: int,
    prev_hash: bytes,
    transactions: list[Transaction] | tuple[Transaction, ...],
    proposer: str,
) -> Block:
    """Assemble a block, computing its tx_root and block_hash."""
    txs = tuple(transactions)
    root = compute_tx_root(txs)
    return Block(
        height=height,
        timestamp=timestamp,
        prev_hash=prev_hash,
        tx_root=root,
        transactions=txs,
        proposer=proposer,
        block_hash=compute_block_hash(height, timestamp, prev_hash, root, proposer),
    )


def genesis(chain_id: str, genesis_timestamp: int) -> Block:
    """Height-0 block: all-zero prev_hash, no transactions, proposer "genesis".

    chain_id names the deployment in configs and file paths; the documented
    header layout has no field for it, so it does not enter the hash.
    """
    del chain_id
    return make_block(0, genesis_timestamp, ZERO_DIGEST, (), GENESIS_PROPOSER)


def new_chain(chain_id: str, genesis_timestamp: int) -> Chain:
    return Chain(blocks=(genesis(chain_id, genesis_timestamp),))


def append_block(
    chain: Chain,
    transactions: list[Transaction] | tuple[Transaction, ...],
    proposer: str,
    timestamp: int,
) -> Chain:
    """Return a new chain extended by one block; the input chain is untouched."""
    tip = chain.tip
    if timestamp < tip.timestamp:
        raise NonMonotonicTimestamp(
            f"timestamp {timestamp} is earlier than tip timestamp {tip.timestamp}"
        )
    block = make_block(tip.height + 1, timestamp, tip.block_hash, transactions, proposer)
    return Chain(blocks=chain.blocks + (block,))


def validate_block(block: Block, index: int, prev: Block | None) -> Violation | None:
    """Check one block against its expected position; reasons in fixed priority order."""
    expected_prev = ZERO_DIGEST if prev is None else prev.block_hash
    if block.block_hash != compute_block_hash(
        block.height, block.timestamp, block.prev_hash, block.tx_root, block.proposer
    ):
        return Violation(index, ViolationReason.HASH_MISMATCH)
    if block.prev_hash != expected_prev:
        return Violation(index, ViolationReason.LINK_BROKEN)
    if block.height != index:
        return Violation(index, ViolationReason.HEIGHT_GAP)
    if block.tx_root != compute_tx_root(block.transactions):
        return Violation(index, ViolationReason.ROOT_MISMATCH)
    if prev is not None and block.timestamp < prev.timestamp:
        return Violation(index, ViolationReason.TIMESTAMP_REGRESSION)
    return None


def validate_chain(chain: Chain) -> Violation | None:
    """Return None when every invariant holds, else the lowest-height Violation.

    Scans upward from genesis and stops at the first violating height, so the
    reported height is always the lowest one and the reason is the first
    applicable in the order: hash_mismatch, link_broken, height_gap,
    root_mismatch, timestamp_regression.
    """
    if not chain.blocks:
        raise EmptyChain("cannot validate an empty chain")
    prev: Block | None = None
    for index, block in enumerate(chain.blocks):
        violation = validate_block(block, index, prev)
        if violation is not None:
            return violation
        prev = block
    return None
