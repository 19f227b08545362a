#!/usr/bin/env python3
"""Run the partition/heal scenario and report what each node ends up with.

Usage: python scripts/run_partition_sim.py [scenario.json] [--trace out.jsonl]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from chainvoice.contract import replay_chain
from chainvoice.simulation import load_scenario, run_simulation


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "scenario",
        nargs="?",
        default=str(Path(__file__).parent / "scenario_partition.json"),
    )
    parser.add_argument("--trace", help="write the event trace (JSONL) here")
    args = parser.parse_args()

    with open(args.scenario) as fp:
        scenario = load_scenario(fp)
    result = run_simulation(scenario)

    print(f"rounds: {result.total_rounds}  converged: {result.converged}")
    for node_id in sorted(result.chains):
        chain = result.chains[node_id]
        state = replay_chain(chain.blocks)
        paid = sum(1 for b in state.bills.values() if b.status == "paid")
        print(
            f"  {node_id}: height={chain.tip.height}"
            f" tip={chain.tip.block_hash.hex()[:16]}"
            f" bills={len(state.bills)} paid={paid}"
        )
    kinds = {}
    for event in result.trace:
        kinds[event["kind"]] = kinds.get(event["kind"], 0) + 1
    print("trace:", "  ".join(f"{k}={v}" for k, v in sorted(kinds.items())))
    if args.trace:
        Path(args.trace).write_text(result.trace_jsonl())
        print(f"trace written to {args.trace}")
    return 0 if result.converged else 1


if __name__ == "__main__":
    sys.exit(main())
