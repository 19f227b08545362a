"""Deterministic round-based network simulation over PeerNodes.

Each round runs: scheduled injections, block production by the round's
round-robin proposer, tip announcements, then delivery of every message due
this round. Message delays are drawn from the seeded generator (uniform
integer rounds in [min_delay, max_delay], at least 1), and messages whose
endpoints sit in different partition groups at send time are dropped.

Nodes that receive a block with unknown ancestry ask the sender for the
missing branch; the response delivers the ancestor blocks individually, under
the same delay and partition rules. Tip announcements make that exchange
happen even when no new blocks are being produced, which is what lets
partitioned groups reconcile after a heal. Announcements and fetch requests
are transport plumbing and are not traced; block deliveries are.

After the scheduled rounds the simulator runs a drain phase of
4 x node_count extra rounds so in-flight reconciliation can finish, then
reports convergence (all heads equal). The trace is a pure function of the
scenario, byte-identical across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO

from .codec import dumps_canonical, tx_from_json, tx_hash, tx_to_json
from .ledger import Block, Chain, validate_chain
from .model import Transaction
from .node import DEFAULT_MAX_BLOCK_TXS, PeerNode, ReceiveOutcome, SubmitResult
from .rng import SplitMix64

DRAIN_ROUNDS_PER_NODE = 4


class InvalidScenario(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PartitionWindow:
    start_round: int
    end_round: int  # inclusive
    groups: tuple[frozenset[str], ...]


@dataclass(frozen=True, slots=True)
class Injection:
    round_no: int
    node_id: str
    tx: Transaction


@dataclass(frozen=True, slots=True)
class Scenario:
    node_count: int
    seed: int
    min_delay: int = 1
    max_delay: int = 1
    partitions: tuple[PartitionWindow, ...] = ()
    injections: tuple[Injection, ...] = ()
    max_block_txs: int = DEFAULT_MAX_BLOCK_TXS

    def node_ids(self) -> list[str]:
        width = len(str(self.node_count - 1))
        return [f"n{i:0{width}d}" for i in range(self.node_count)]


def _validate_scenario(scenario: Scenario) -> None:
    if scenario.node_count < 1:
        raise InvalidScenario("node_count must be >= 1")
    if scenario.min_delay < 1 or scenario.max_delay < scenario.min_delay:
        raise InvalidScenario("delays must satisfy 1 <= min_delay <= max_delay")
    ids = set(scenario.node_ids())
    spans: list[tuple[int, int]] = []
    for window in scenario.partitions:
        if window.start_round > window.end_round:
            raise InvalidScenario("partition window start after end")
        for start, end in spans:
            if window.start_round <= end and start <= window.end_round:
                raise InvalidScenario("partition windows overlap in rounds")
        spans.append((window.start_round, window.end_round))
        seen: set[str] = set()
        for group in window.groups:
            overlap = seen & group
            if overlap:
                raise InvalidScenario(f"partition groups overlap on {sorted(overlap)}")
            unknown = group - ids
            if unknown:
                raise InvalidScenario(f"partition names unknown nodes {sorted(unknown)}")
            seen |= group
    for injection in scenario.injections:
        if injection.node_id not in ids:
            raise InvalidScenario(f"injection targets unknown node {injection.node_id}")
        if injection.round_no < 0:
            raise InvalidScenario("injection round must be >= 0")


def scenario_from_json(obj: dict) -> Scenario:
    try:
        partitions = tuple(
            PartitionWindow(
                start_round=int(w["start_round"]),
                end_round=int(w["end_round"]),
                groups=tuple(frozenset(g) for g in w["groups"]),
            )
            for w in obj.get("partitions", [])
        )
        injections = tuple(
            Injection(
                round_no=int(i["round"]),
                node_id=str(i["node"]),
                tx=tx_from_json(i["tx"]),
            )
            for i in obj.get("injections", [])
        )
        delay = obj.get("delay", {})
        scenario = Scenario(
            node_count=int(obj["node_count"]),
            seed=int(obj["seed"]),
            min_delay=int(delay.get("min_rounds", 1)),
            max_delay=int(delay.get("max_rounds", 1)),
            partitions=partitions,
            injections=injections,
            max_block_txs=int(obj.get("max_block_txs", DEFAULT_MAX_BLOCK_TXS)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenario(f"bad scenario document: {exc}") from None
    _validate_scenario(scenario)
    return scenario


def load_scenario(fp: IO[str]) -> Scenario:
    try:
        obj = json.load(fp)
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise InvalidScenario("scenario must be a JSON object")
    return scenario_from_json(obj)


@dataclass(frozen=True, slots=True)
class SimResult:
    chains: dict[str, Chain]
    trace: tuple[dict, ...]
    converged: bool
    total_rounds: int

    def trace_jsonl(self) -> str:
        return "".join(dumps_canonical(event) + "\n" for event in self.trace)

    def summary(self) -> dict:
        tips = {nid: chain.tip.block_hash.hex() for nid, chain in sorted(self.chains.items())}
        heights = {nid: chain.tip.height for nid, chain in sorted(self.chains.items())}
        return {
            "converged": self.converged,
            "rounds": self.total_rounds,
            "tips": tips,
            "heights": heights,
        }


# message kinds flowing between nodes
_BLOCK = "block"
_ANNOUNCE = "announce"
_FETCH = "fetch"


@dataclass(slots=True)
class _Message:
    kind: str
    sender: str
    recipient: str
    block: Block | None = None
    tip_hash: bytes | None = None
    want_hash: bytes | None = None
    synced: bool = False  # block came from a fetch response, not a broadcast


@dataclass(slots=True)
class _Runner:
    scenario: Scenario
    rng: SplitMix64 = field(init=False)
    nodes: dict[str, PeerNode] = field(init=False)
    ids: list[str] = field(init=False)
    inbox: dict[int, list[_Message]] = field(init=False)
    trace: list[dict] = field(init=False)
    # per requester: wanted block hash -> round after which the fetch may be
    # retried (covers fetches lost to a partition)
    pending_fetches: dict[str, dict[bytes, int]] = field(init=False)

    def __post_init__(self) -> None:
        self.rng = SplitMix64(self.scenario.seed)
        self.ids = self.scenario.node_ids()
        self.nodes = {
            nid: PeerNode(nid, max_block_txs=self.scenario.max_block_txs) for nid in self.ids
        }
        self.inbox = {}
        self.trace = []
        self.pending_fetches = {nid: {} for nid in self.ids}

    # --- helpers ---------------------------------------------------------

    def _group_of(self, node_id: str, round_no: int) -> int:
        """Partition group index for a node; uncovered nodes share group -1."""
        for wi, window in enumerate(self.scenario.partitions):
            if window.start_round <= round_no <= window.end_round:
                for gi, group in enumerate(window.groups):
                    if node_id in group:
                        return (wi + 1) * 1000 + gi
                return -1
        return -1

    def _cut(self, a: str, b: str, round_no: int) -> bool:
        return self._group_of(a, round_no) != self._group_of(b, round_no)

    def _schedule(self, msg: _Message, round_no: int) -> bool:
        """Queue a message with a drawn delay; False if the partition cuts it."""
        if self._cut(msg.sender, msg.recipient, round_no):
            return False
        delay = self.rng.next_int(self.scenario.min_delay, self.scenario.max_delay)
        self.inbox.setdefault(round_no + delay, []).append(msg)
        return True

    def _emit(self, **event) -> None:
        self.trace.append(event)

    # --- round phases ------------------------------------------------------

    def _inject(self, round_no: int) -> None:
        for injection in self.scenario.injections:
            if injection.round_no != round_no:
                continue
            node = self.nodes[injection.node_id]
            result, reason = node.submit_tx(injection.tx)
            outcome = (
                "accepted" if result is SubmitResult.ACCEPTED else f"rejected:{reason}"
            )
            self._emit(
                round=round_no,
                kind="inject",
                node=injection.node_id,
                tx=tx_hash(injection.tx).hex(),
                result=outcome,
            )

    def _produce(self, round_no: int) -> None:
        proposer_id = PeerNode.scheduled_proposer(round_no, self.ids)
        node = self.nodes[proposer_id]
        node.local_clock = round_no
        block = node.produce_block(round_no, self.ids, timestamp=round_no)
        if not isinstance(block, Block):
            return
        self._emit(
            round=round_no,
            kind="propose",
            node=proposer_id,
            height=block.height,
            block=block.block_hash.hex(),
            txs=len(block.transactions),
        )
        for recipient in self.ids:
            if recipient == proposer_id:
                continue
            msg = _Message(_BLOCK, proposer_id, recipient, block=block)
            if not self._schedule(msg, round_no):
                self._emit(
                    round=round_no,
                    kind="drop",
                    **{"from": proposer_id, "to": recipient},
                    block=block.block_hash.hex(),
                )

    def _announce(self, round_no: int) -> None:
        for sender in self.ids:
            tip = self.nodes[sender].head
            for recipient in self.ids:
                if recipient == sender:
                    continue
                # announcement drops are transport noise, not traced
                self._schedule(
                    _Message(_ANNOUNCE, sender, recipient, tip_hash=tip), round_no
                )

    def _deliver(self, round_no: int) -> None:
        for msg in self.inbox.pop(round_no, []):
            if msg.kind == _BLOCK:
                self._deliver_block(msg, round_no)
            elif msg.kind == _ANNOUNCE:
                self._handle_announce(msg, round_no)
            else:
                self._handle_fetch(msg, round_no)

    def _deliver_block(self, msg: _Message, round_no: int) -> None:
        node = self.nodes[msg.recipient]
        block = msg.block
        assert block is not None
        old_head = node.head
        result = node.receive_block(block)
        self._emit(
            round=round_no,
            kind="deliver",
            **{"from": msg.sender, "to": msg.recipient},
            block=block.block_hash.hex(),
            result=result.outcome.value
            + (f":{result.reason}" if result.reason else ""),
        )
        self.pending_fetches[msg.recipient].pop(block.block_hash, None)
        if result.outcome is ReceiveOutcome.BUFFERED:
            self._request_ancestry(msg.recipient, msg.sender, block.prev_hash, round_no)
        elif result.outcome is ReceiveOutcome.REJECTED:
            self._emit(
                round=round_no,
                kind="reject",
                node=msg.recipient,
                block=block.block_hash.hex(),
                reason=result.reason,
            )
        if node.head != old_head:
            self._emit(
                round=round_no,
                kind="adopt",
                node=msg.recipient,
                tip=node.head.hex(),
                height=node.head_block().height,
            )

    def _handle_announce(self, msg: _Message, round_no: int) -> None:
        node = self.nodes[msg.recipient]
        assert msg.tip_hash is not None
        if msg.tip_hash in node.blocks:
            return
        self._request_ancestry(msg.recipient, msg.sender, msg.tip_hash, round_no)

    def _request_ancestry(
        self, requester: str, provider: str, want: bytes, round_no: int
    ) -> None:
        retry_after = self.pending_fetches[requester].get(want)
        if retry_after is not None and round_no <= retry_after:
            return
        # allow one round-trip before retrying
        self.pending_fetches[requester][want] = round_no + 2 * self.scenario.max_delay + 1
        self._schedule(
            _Message(_FETCH, requester, provider, want_hash=want), round_no
        )

    def _handle_fetch(self, msg: _Message, round_no: int) -> None:
        provider = self.nodes[msg.recipient]
        assert msg.want_hash is not None
        if msg.want_hash not in provider.blocks:
            return
        # ship the wanted block and everything below it, oldest first; the
        # requester skips anything it already has
        for block in provider.branch(msg.want_hash).blocks:
            if block.height == 0:
                continue
            self._schedule(
                _Message(_BLOCK, msg.recipient, msg.sender, block=block, synced=True),
                round_no,
            )

    # --- driver -----------------------------------------------------------

    def run(self) -> SimResult:
        scenario = self.scenario
        last_injection = max((i.round_no for i in scenario.injections), default=-1)
        last_partition = max((w.end_round for w in scenario.partitions), default=-1)
        schedule_end = max(last_injection, last_partition) + 1
        total = schedule_end + DRAIN_ROUNDS_PER_NODE * scenario.node_count
        for round_no in range(total):
            self._inject(round_no)
            self._produce(round_no)
            self._announce(round_no)
            self._deliver(round_no)
        chains = {nid: node.chain for nid, node in self.nodes.items()}
        for chain in chains.values():
            violation = validate_chain(chain)
            if violation is not None:  # pragma: no cover - safety net
                raise AssertionError(f"simulated node produced an invalid chain: {violation}")
        tips = {node.head for node in self.nodes.values()}
        return SimResult(
            chains=chains,
            trace=tuple(self.trace),
            converged=len(tips) == 1,
            total_rounds=total,
        )


def run_simulation(scenario: Scenario) -> SimResult:
    """Execute a scenario to completion; deterministic for a fixed scenario."""
    _validate_scenario(scenario)
    return _Runner(scenario).run()


def scenario_to_json(scenario: Scenario) -> dict:
    return {
        "node_count": scenario.node_count,
        "seed": scenario.seed,
        "delay": {"min_rounds": scenario.min_delay, "max_rounds": scenario.max_delay},
        "max_block_txs": scenario.max_block_txs,
        "partitions": [
            {
                "start_round": w.start_round,
                "end_round": w.end_round,
                "groups": [sorted(g) for g in w.groups],
            }
            for w in scenario.partitions
        ],
        "injections": [
            {"round": i.round_no, "node": i.node_id, "tx": tx_to_json(i.tx)}
            for i in scenario.injections
        ],
    }
