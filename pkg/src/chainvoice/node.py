"""A single replicated peer: mempool, block tree, fork choice, state tracking.

Each node keeps every block it has ever accepted in a tree keyed by hash and
adopts the branch chosen by the fork rule (longest, ties to the smallest tip
hash). The node's contract state always equals a genesis replay of its adopted
chain; a cached state per block makes that cheap to maintain.

Blocks whose parent is unknown are buffered (FIFO, capacity 64) until the
parent arrives; the simulator uses the returned outcome to fetch missing
ancestry from the sender.
"""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass

from .codec import tx_hash
from .contract import ContractState, TxError, apply_transaction
from .ledger import (
    Block,
    Chain,
    compute_block_hash,
    compute_tx_root,
    genesis,
    make_block,
)
from .model import Transaction

ORPHAN_BUFFER_CAP = 64
DEFAULT_MAX_BLOCK_TXS = 100


class SubmitResult(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class ProduceOutcome(enum.Enum):
    NOT_PROPOSER = "not_proposer"
    EMPTY_MEMPOOL = "empty_mempool"


class ReceiveOutcome(enum.Enum):
    ADOPTED = "adopted"
    EXTENDED_FORK = "extended_fork"
    REJECTED = "rejected"
    IGNORED = "ignored"  # duplicate of a known block
    BUFFERED = "buffered"  # parent unknown; held in the orphan buffer


BAD_HASH = "bad_hash"
BAD_LINK_UNKNOWN_PARENT = "bad_link_unknown_parent"
INVALID_TX = "invalid_tx"
DUPLICATE_TX = "DuplicateTx"


@dataclass(frozen=True, slots=True)
class ReceiveResult:
    outcome: ReceiveOutcome
    reason: str | None = None


def fork_choice(branches: list[Chain]) -> Chain:
    """Longest branch wins; equal lengths break to the lexicographically
    smallest tip block hash. All branches must share a genesis."""
    if not branches:
        raise ValueError("fork_choice requires at least one branch")
    best = branches[0]
    for branch in branches[1:]:
        if len(branch) > len(best) or (
            len(branch) == len(best) and branch.tip.block_hash < best.tip.block_hash
        ):
            best = branch
    return best


class PeerNode:
    def __init__(
        self,
        node_id: str,
        chain_id: str = "sim",
        genesis_timestamp: int = 0,
        max_block_txs: int = DEFAULT_MAX_BLOCK_TXS,
    ):
        self.node_id = node_id
        self.max_block_txs = max_block_txs
        root = genesis(chain_id, genesis_timestamp)
        self.blocks: dict[bytes, Block] = {root.block_hash: root}
        self.children: dict[bytes, list[bytes]] = {}
        self.states: dict[bytes, ContractState] = {root.block_hash: ContractState()}
        self.tips: set[bytes] = {root.block_hash}
        self.head: bytes = root.block_hash
        self.mempool: OrderedDict[bytes, Transaction] = OrderedDict()
        self.orphans: OrderedDict[bytes, Block] = OrderedDict()
        self.local_clock: int = genesis_timestamp
        self._head_tx_hashes: set[bytes] = set()

    # --- chain views ----------------------------------------------------

    @property
    def contract_state(self) -> ContractState:
        return self.states[self.head]

    def branch(self, tip_hash: bytes) -> Chain:
        blocks: list[Block] = []
        cursor: bytes | None = tip_hash
        while cursor is not None:
            block = self.blocks[cursor]
            blocks.append(block)
            cursor = block.prev_hash if block.height > 0 else None
        blocks.reverse()
        return Chain(blocks=tuple(blocks))

    @property
    def chain(self) -> Chain:
        return self.branch(self.head)

    def head_block(self) -> Block:
        return self.blocks[self.head]

    # --- mempool ----------------------------------------------------------

    def submit_tx(self, tx: Transaction) -> tuple[SubmitResult, str | None]:
        """Validate against the current confirmed state and enqueue once."""
        digest = tx_hash(tx)
        if digest in self.mempool or digest in self._head_tx_hashes:
            return SubmitResult.REJECTED, DUPLICATE_TX
        probe = self.contract_state.clone()
        try:
            apply_transaction(probe, tx, self.head_block().height + 1)
        except TxError as exc:
            return SubmitResult.REJECTED, exc.code
        self.mempool[digest] = tx
        return SubmitResult.ACCEPTED, None

    # --- block production ---------------------------------------------------

    @staticmethod
    def scheduled_proposer(round_no: int, node_ids: list[str]) -> str:
        ordered = sorted(node_ids)
        return ordered[round_no % len(ordered)]

    def produce_block(
        self, round_no: int, node_ids: list[str], timestamp: int | None = None
    ) -> Block | ProduceOutcome:
        """Seal pending transactions if this node is the round's proposer.

        Drains the mempool FIFO up to max_block_txs, dropping entries that no
        longer apply against the interim state. Returns NOT_PROPOSER out of
        turn and EMPTY_MEMPOOL when nothing valid is pending.
        """
        if self.scheduled_proposer(round_no, node_ids) != self.node_id:
            return ProduceOutcome.NOT_PROPOSER
        if not self.mempool:
            return ProduceOutcome.EMPTY_MEMPOOL
        head = self.head_block()
        ts = timestamp if timestamp is not None else max(self.local_clock, head.timestamp)
        ts = max(ts, head.timestamp)
        scratch = self.contract_state.clone()
        included: list[Transaction] = []
        included_hashes: list[bytes] = []
        dropped: list[bytes] = []
        for digest, tx in self.mempool.items():
            if len(included) >= self.max_block_txs:
                break
            try:
                apply_transaction(scratch, tx, head.height + 1)
            except TxError:
                dropped.append(digest)
                continue
            included.append(tx)
            included_hashes.append(digest)
        for digest in dropped:
            del self.mempool[digest]
        if not included:
            return ProduceOutcome.EMPTY_MEMPOOL
        block = make_block(head.height + 1, ts, head.block_hash, included, self.node_id)
        for digest in included_hashes:
            del self.mempool[digest]
        self._attach(block, scratch)
        self._set_head(block.block_hash)
        return block

    # --- block reception ------------------------------------------------

    def receive_block(self, block: Block) -> ReceiveResult:
        """Validate and integrate a block, adopting per the fork rule.

        Outcomes: ADOPTED (head changed), EXTENDED_FORK (stored on a losing
        branch), IGNORED (duplicate), BUFFERED (unknown parent, orphaned),
        REJECTED with reason bad_hash or invalid_tx.
        """
        if block.block_hash in self.blocks:
            return ReceiveResult(ReceiveOutcome.IGNORED)
        if block.block_hash != compute_block_hash(
            block.height, block.timestamp, block.prev_hash, block.tx_root, block.proposer
        ):
            return ReceiveResult(ReceiveOutcome.REJECTED, BAD_HASH)
        if block.tx_root != compute_tx_root(block.transactions):
            return ReceiveResult(ReceiveOutcome.REJECTED, BAD_HASH)
        if block.prev_hash not in self.blocks or block.height == 0:
            self._buffer_orphan(block)
            return ReceiveResult(ReceiveOutcome.BUFFERED, BAD_LINK_UNKNOWN_PARENT)
        return self._connect(block)

    def _connect(self, block: Block) -> ReceiveResult:
        parent = self.blocks[block.prev_hash]
        if block.height != parent.height + 1 or block.timestamp < parent.timestamp:
            return ReceiveResult(ReceiveOutcome.REJECTED, BAD_HASH)
        state = self.states[block.prev_hash].clone()
        try:
            for tx in block.transactions:
                apply_transaction(state, tx, block.height)
        except TxError:
            return ReceiveResult(ReceiveOutcome.REJECTED, INVALID_TX)
        self._attach(block, state)
        old_head = self.head
        self._choose_head()
        result = (
            ReceiveResult(ReceiveOutcome.ADOPTED)
            if self.head != old_head
            else ReceiveResult(ReceiveOutcome.EXTENDED_FORK)
        )
        self._drain_orphans(block.block_hash)
        return result

    def _attach(self, block: Block, state: ContractState) -> None:
        self.blocks[block.block_hash] = block
        self.states[block.block_hash] = state
        self.children.setdefault(block.prev_hash, []).append(block.block_hash)
        self.tips.discard(block.prev_hash)
        self.tips.add(block.block_hash)

    def _buffer_orphan(self, block: Block) -> None:
        if block.block_hash in self.orphans:
            return
        while len(self.orphans) >= ORPHAN_BUFFER_CAP:
            self.orphans.popitem(last=False)
        self.orphans[block.block_hash] = block

    def _drain_orphans(self, parent_hash: bytes) -> None:
        ready = [b for b in self.orphans.values() if b.prev_hash == parent_hash]
        for block in ready:
            del self.orphans[block.block_hash]
            self._connect(block)

    # --- head management -----------------------------------------------

    def _choose_head(self) -> None:
        best = fork_choice([self.branch(t) for t in sorted(self.tips)])
        self._set_head(best.tip.block_hash)

    def _set_head(self, new_head: bytes) -> None:
        if new_head == self.head:
            return
        old_hashes = self._branch_hashes(self.head)
        self.head = new_head
        new_hashes = self._branch_hashes(new_head)
        new_hash_set = set(new_hashes)
        new_branch_txs: set[bytes] = set()
        for block_hash in new_hashes:
            for tx in self.blocks[block_hash].transactions:
                new_branch_txs.add(tx_hash(tx))
        # transactions unique to the abandoned branch go back to the mempool,
        # oldest block first
        returned: list[tuple[bytes, Transaction]] = []
        for block_hash in reversed(old_hashes):
            if block_hash in new_hash_set:
                continue
            for tx in self.blocks[block_hash].transactions:
                digest = tx_hash(tx)
                if digest not in new_branch_txs:
                    returned.append((digest, tx))
        self._head_tx_hashes = new_branch_txs
        self._refilter_mempool(returned)

    def _branch_hashes(self, tip_hash: bytes) -> list[bytes]:
        """Hashes from tip down to genesis (newest first)."""
        out = []
        cursor: bytes | None = tip_hash
        while cursor is not None:
            block = self.blocks.get(cursor)
            if block is None:
                break
            out.append(cursor)
            cursor = block.prev_hash if block.height > 0 else None
        return out

    def _refilter_mempool(self, returned: list[tuple[bytes, Transaction]]) -> None:
        """Rebuild the mempool against the new head: returned fork txs first
        (chain order), then the existing queue, dropping invalid entries."""
        candidates: OrderedDict[bytes, Transaction] = OrderedDict()
        for digest, tx in returned:
            if digest not in self._head_tx_hashes:
                candidates[digest] = tx
        for digest, tx in self.mempool.items():
            if digest not in candidates and digest not in self._head_tx_hashes:
                candidates[digest] = tx
        state = self.contract_state
        height = self.head_block().height + 1
        kept: OrderedDict[bytes, Transaction] = OrderedDict()
        for digest, tx in candidates.items():
            probe = state.clone()
            try:
                apply_transaction(probe, tx, height)
            except TxError:
                continue
            kept[digest] = tx
        self.mempool = kept
