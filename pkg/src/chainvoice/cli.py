"""Command-line surface: a thin client over the HTTP API plus the offline
simulator and data-directory tools. Holds no ledger logic of its own.

Exit codes: 0 success; 1 domain failure (chain violation, corrupt data
directory, failed convergence); 2 usage; 3-9 map the API error classes
(400, 401, 403, 404, 409, 422, other); 10 connection refused.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .client import ApiClient, ApiError, ConnectionFailed
from .codec import dumps_canonical
from .model import DocKind, Role
from .service import (
    ConfigError,
    CorruptLog,
    LedgerService,
    generate_key_records,
    load_config,
    load_keys,
    serve,
)
from .simulation import InvalidScenario, load_scenario, run_simulation

DEFAULT_ENDPOINT = "http://127.0.0.1:8080"

_STATUS_EXIT = {400: 3, 401: 4, 403: 5, 404: 6, 409: 7, 422: 8}


class CliFailure(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def _emit(args, payload, human: str | None = None) -> None:
    if args.output == "json":
        print(dumps_canonical(payload))
    else:
        print(human if human is not None else dumps_canonical(payload))


def _client(args) -> ApiClient:
    key_file = args.key_file or os.environ.get("CHAINVOICE_KEY_FILE")
    api_key = None
    if key_file:
        keys = load_keys(key_file)
        if args.as_account:
            matches = [k for k in keys.values() if k.account_id == args.as_account]
            if not matches:
                raise CliFailure(1, f"no key for account {args.as_account} in {key_file}")
            api_key = matches[0].key
        elif len(keys) == 1:
            api_key = next(iter(keys.values())).key
        else:
            raise CliFailure(1, f"{key_file} holds several keys; pick one with --as")
    endpoint = args.endpoint or os.environ.get("CHAINVOICE_ENDPOINT") or DEFAULT_ENDPOINT
    return ApiClient(endpoint, api_key)


def _parse_account_spec(spec: str) -> tuple[str, Role, int]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise CliFailure(2, f"--account expects id:role:balance, got {spec!r}")
    account_id, role_name, balance_raw = parts
    try:
        role = Role(role_name)
    except ValueError:
        raise CliFailure(2, f"unknown role {role_name!r} in {spec!r}") from None
    try:
        balance = int(balance_raw)
    except ValueError:
        raise CliFailure(2, f"balance must be an integer in {spec!r}") from None
    return account_id, role, balance


# --- subcommand implementations -------------------------------------------------


def _cmd_init(args) -> int:
    from .model import RegisterAccount

    specs = [_parse_account_spec(s) for s in args.account or []]
    ledger = LedgerService(args.data_dir, args.max_block_txs)
    ledger.create(genesis_timestamp=args.genesis_timestamp)
    for account_id, role, balance in specs:
        ledger.accept_tx(RegisterAccount(account_id, role, balance))
    ledger.close()

    key_path = Path(args.key_file) if args.key_file else Path(args.data_dir) / "keys.json"
    records = generate_key_records([(a, r) for a, r, _ in specs])
    key_path.write_text(json.dumps(records, indent=2) + "\n")
    os.chmod(key_path, 0o600)

    summary = {
        "data_dir": str(args.data_dir),
        "key_file": str(key_path),
        "accounts": [{"account_id": a, "role": r.value, "balance": b} for a, r, b in specs],
    }
    lines = [f"initialised {args.data_dir}", f"keys written to {key_path} (not shown)"]
    lines += [f"  {a} ({r.value}) balance={b}" for a, r, b in specs]
    _emit(args, summary, "\n".join(lines))
    return 0


def _cmd_serve(args) -> int:
    config = load_config(args.config) if args.config else load_config()
    for name in ("host", "port", "data_dir", "block_interval", "max_block_txs", "mode", "console_dir"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if args.key_file:
        config.key_file = args.key_file
    config.validate()
    keys = {}
    if config.key_file:
        keys = load_keys(config.key_file)
    else:
        default_keys = Path(config.data_dir) / "keys.json"
        if default_keys.exists():
            keys = load_keys(str(default_keys))
        else:
            print("warning: no key file; every request will be rejected", file=sys.stderr)
    try:
        serve(config, keys)
    except CorruptLog as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_create_bill(args) -> int:
    client = _client(args)
    payee = args.payee or (client.me()["account_id"] if client.api_key else None)
    if payee is None:
        raise CliFailure(2, "--payee is required without a key file")
    result = client.create_bill(payee, args.amount, args.tax, args.memo)
    _emit(args, result, f"bill {result['bill_id']} created")
    return 0


def _cmd_pay_bill(args) -> int:
    result = _client(args).pay_bill(args.bill_id, args.value)
    _emit(args, result, f"bill {result['bill_id']} {result['status']}")
    return 0


def _cmd_register(args) -> int:
    result = _client(args).register_account(args.account_id, args.role, args.balance)
    _emit(args, result, f"account {result['account_id']} registered as {result['role']}")
    return 0


def _cmd_remit(args) -> int:
    client = _client(args)
    seller = args.seller or client.me()["account_id"]
    result = client.remit(seller, args.amount, args.period)
    _emit(args, result, f"remitted {result['amount']} for {result['period']}")
    return 0


def _cmd_file_doc(args) -> int:
    result = _client(args).file_document(args.kind, args.subject, args.payload)
    _emit(args, result, f"{result['kind']} filed against {result['subject']}")
    return 0


def _cmd_show(args) -> int:
    client = _client(args)
    if args.what == "bill":
        if args.id is None:
            raise CliFailure(2, "show bill needs an id")
        result = client.bill(int(args.id))
        human = (
            f"bill #{result['bill_id']}: payee={result['payee']} amount={result['amount']}"
            f" tax={result['tax_amount']} status={result['status']}"
            f" memo={result['memo']!r} payer={result['payer']}"
        )
    elif args.what == "account":
        if args.id is None:
            raise CliFailure(2, "show account needs an id")
        result = client.account(args.id)
        human = f"{result['account_id']} ({result['role']}) balance={result['balance']}"
    elif args.what == "chain":
        result = client.chain()
        blocks = result["blocks"]
        human = "\n".join(
            f"#{b['height']} {b['block_hash'][:16]} txs={len(b['transactions'])} ts={b['timestamp']}"
            for b in blocks
        )
    elif args.what == "events":
        result = client.events(args.since)
        human = "\n".join(
            f"[{e['seq']}] {e['type']} " + dumps_canonical({k: v for k, v in e.items() if k not in ('seq', 'type')})
            for e in result["events"]
        ) or "(no events)"
    elif args.what == "view":
        result = client.view()
        human = "\n".join(
            f"h{r['height']} {r['tx']['type']} " + dumps_canonical(r["tx"])
            for r in result["records"]
        ) or "(no visible records)"
    else:  # me
        result = client.me()
        human = (
            f"{result['account_id']} ({result['role']}) "
            + (f"balance={result['balance']}" if result["registered"] else "not registered on chain")
        )
    _emit(args, result, human)
    return 0


def _cmd_verify(args) -> int:
    if args.data_dir:
        ledger = LedgerService(args.data_dir)
        try:
            ledger.load()
        except CorruptLog as exc:
            _emit(
                args,
                {"ok": False, "violation": {"height": exc.height, "reason": exc.detail}},
                f"violation at height {exc.height}: {exc.detail}",
            )
            return 1
        finally:
            ledger.close()
        assert ledger.chain is not None
        _emit(
            args,
            {"ok": True, "height": ledger.chain.tip.height},
            f"ok ({len(ledger.chain.blocks)} blocks)",
        )
        return 0
    result = _client(args).verify()
    if result.get("ok"):
        _emit(args, result, f"ok (tip height {result.get('height')})")
        return 0
    violation = result.get("violation", {})
    _emit(
        args,
        result,
        f"violation at height {violation.get('height')}: {violation.get('reason')}",
    )
    return 1


def _cmd_report(args) -> int:
    result = _client(args).tax_report(args.seller, args.period)
    human = (
        f"{result['seller']} {result['period']}: collected={result['tax_collected']}"
        f" remitted={result['tax_remitted']} discrepancy={result['discrepancy']}"
        f" bills={result['bill_ids']}"
    )
    _emit(args, result, human)
    return 0


def _cmd_flags(args) -> int:
    result = _client(args).flags(args.period)
    human = "\n".join(f"{f['seller']}: {f['discrepancy']}" for f in result) or "(no flags)"
    _emit(args, result, human)
    return 0


def _cmd_simulate(args) -> int:
    try:
        with open(args.scenario, "r", encoding="utf-8") as fp:
            scenario = load_scenario(fp)
    except OSError as exc:
        raise CliFailure(1, f"cannot read scenario: {exc}") from None
    result = run_simulation(scenario)
    if args.trace_out:
        Path(args.trace_out).write_text(result.trace_jsonl())
    summary = result.summary()
    human = (
        f"rounds={summary['rounds']} converged={summary['converged']}\n"
        + "\n".join(f"  {nid}: h{h} {summary['tips'][nid][:16]}" for nid, h in summary["heights"].items())
    )
    _emit(args, summary, human)
    return 0


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # the shared flags are accepted both before and after the subcommand;
    # SUPPRESS keeps an omitted trailing flag from clobbering a leading one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--endpoint", default=argparse.SUPPRESS, help="service URL (or CHAINVOICE_ENDPOINT)"
    )
    common.add_argument(
        "--key-file", default=argparse.SUPPRESS, help="API key file (or CHAINVOICE_KEY_FILE)"
    )
    common.add_argument(
        "--as", dest="as_account", default=argparse.SUPPRESS, metavar="ACCOUNT",
        help="pick the key bound to this account",
    )
    common.add_argument("--output", choices=("human", "json"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="chainvoice",
        description="Tamper-evident invoice ledger: client, service, and simulator.",
    )
    parser.add_argument("--endpoint", help="service URL (or CHAINVOICE_ENDPOINT)")
    parser.add_argument("--key-file", help="API key file (or CHAINVOICE_KEY_FILE)")
    parser.add_argument("--as", dest="as_account", metavar="ACCOUNT", help="pick the key bound to this account")
    parser.add_argument("--output", choices=("human", "json"), default="human")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", parents=[common], help="create a data directory, genesis block, accounts, and keys")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--account", action="append", metavar="ID:ROLE:BALANCE")
    p.add_argument("--genesis-timestamp", type=int, default=None)
    p.add_argument("--max-block-txs", type=int, default=100)
    p.set_defaults(func=_cmd_init)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--data-dir")
    p.add_argument("--block-interval", type=int)
    p.add_argument("--max-block-txs", type=int)
    p.add_argument("--mode", choices=("standalone", "simulation-attached"))
    p.add_argument("--console-dir", help="serve the web console from this directory")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("create-bill", parents=[common], help="create an invoice payable to you")
    p.add_argument("--payee", help="defaults to the key's account")
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--tax", type=int, required=True)
    p.add_argument("--memo", default="")
    p.set_defaults(func=_cmd_create_bill)

    p = sub.add_parser("pay-bill", parents=[common], help="pay a bill (payer is the key's account)")
    p.add_argument("bill_id", type=int)
    p.add_argument("--value", type=int, required=True)
    p.set_defaults(func=_cmd_pay_bill)

    p = sub.add_parser("register", parents=[common], help="register an account on chain")
    p.add_argument("--account-id", required=True)
    p.add_argument("--role", required=True, choices=[r.value for r in Role])
    p.add_argument("--balance", type=int, default=0)
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("remit", parents=[common], help="record a tax remittance for a period")
    p.add_argument("--seller", help="defaults to the key's account")
    p.add_argument("--amount", type=int, required=True)
    p.add_argument("--period", required=True, metavar="YYYY-MM")
    p.set_defaults(func=_cmd_remit)

    p = sub.add_parser("file-doc", parents=[common], help="file a tax document against an account")
    p.add_argument("--kind", required=True, choices=[k.value for k in DocKind])
    p.add_argument("--subject", required=True)
    p.add_argument("--payload", default="")
    p.set_defaults(func=_cmd_file_doc)

    p = sub.add_parser("show", parents=[common], help="inspect bills, accounts, the chain, events, or your view")
    p.add_argument("what", choices=("bill", "account", "chain", "events", "view", "me"))
    p.add_argument("id", nargs="?")
    p.add_argument("--since", type=int, default=0)
    p.set_defaults(func=_cmd_show)

    p = sub.add_parser("verify", parents=[common], help="check chain integrity (API, or offline with --data-dir)")
    p.add_argument("--data-dir", help="verify a data directory without a server")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("report", parents=[common], help="collected-vs-remitted tax report")
    p.add_argument("--seller", required=True)
    p.add_argument("--period", required=True, metavar="YYYY-MM")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("flags", parents=[common], help="shopkeepers with positive tax discrepancy")
    p.add_argument("--period", required=True, metavar="YYYY-MM")
    p.set_defaults(func=_cmd_flags)

    p = sub.add_parser("simulate", parents=[common], help="run a replication scenario offline")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--trace-out", help="write the event trace (JSONL) here")
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ApiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _STATUS_EXIT.get(exc.status, 9)
    except ConnectionFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 10
    except (ConfigError, InvalidScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
