"""HTTP/JSON service over the ledger: authenticated accounts, append-only
persistence, crash recovery, and role-policy enforcement at the boundary.

Persistence is two files in the data directory:

* ``chain.jsonl`` - sealed blocks in the ledger interchange format
* ``wal.jsonl`` - transactions accepted but not yet sealed, one JSON record
  per line with a global sequence number and the hash of the canonical
  transaction bytes

Every accepted transaction is appended to the write-ahead log and fsynced
before its HTTP response goes out, so anything acknowledged with a 2xx
survives an immediate kill. A background tick seals all pending transactions
into blocks every ``block_interval`` seconds (empty ticks are skipped).
Startup replays chain + wal to rebuild state and fails loudly, naming the
violating height, if any byte of the persisted log no longer checks out.

Heights are assigned deterministically: a pending transaction at queue
position p will be sealed at height tip+1+(p // max_block_txs) because a tick
always drains the whole queue in FIFO order. Replay makes the same guess, so
the live state digest always matches a from-disk rebuild.
"""

from __future__ import annotations

import json
import os
import secrets
import signal
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .codec import (
    DecodeError,
    dumps_canonical,
    block_to_json,
    block_to_jsonl,
    read_chain_jsonl,
    tx_from_json,
    tx_hash,
    tx_to_json,
)
from .contract import (
    PAID,
    UNPAID,
    Bill,
    ContractState,
    TxError,
    UnknownAccount,
    UnknownBill,
    apply_transaction,
    event_to_json,
)
from .ledger import Chain, append_block, new_chain, validate_chain
from .model import (
    FULL_VIEW_ROLES,
    REDACTED,
    CreateBill,
    DocKind,
    PayBill,
    RegisterAccount,
    Role,
    TaxDocument,
    TaxRemittance,
    Transaction,
)
from .views import (
    POLICY_TABLE,
    Rule,
    ViewContext,
    flag_evasion,
    flags_to_json,
    is_own_record,
    period_of_timestamp,
    tax_report,
    visible_records,
)

MODE_STANDALONE = "standalone"
MODE_SIMULATION = "simulation-attached"
SERVICE_PROPOSER = "standalone"

CHAIN_FILE = "chain.jsonl"
WAL_FILE = "wal.jsonl"

ENV_PREFIX = "CHAINVOICE_"


class ConfigError(ValueError):
    pass


class CorruptLog(Exception):
    """The persisted ledger fails verification at a specific height."""

    def __init__(self, height: int, detail: str):
        super().__init__(f"corrupt ledger at height {height}: {detail}")
        self.height = height
        self.detail = detail


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    data_dir: str = "./chainvoice-data"
    block_interval: int = 2
    max_block_txs: int = 100
    mode: str = MODE_STANDALONE
    key_file: str | None = None
    console_dir: str | None = None

    def validate(self) -> None:
        if self.mode not in (MODE_STANDALONE, MODE_SIMULATION):
            raise ConfigError(f"unknown mode: {self.mode}")
        if self.mode == MODE_STANDALONE and self.block_interval < 1:
            raise ConfigError("block_interval must be >= 1 second in standalone mode")
        if self.max_block_txs < 1:
            raise ConfigError("max_block_txs must be >= 1")
        # port 0 asks the OS for any free port
        if not 0 <= self.port < 65536:
            raise ConfigError(f"port out of range: {self.port}")


_CONFIG_FIELDS = {
    "host": str,
    "port": int,
    "data_dir": str,
    "block_interval": int,
    "max_block_txs": int,
    "mode": str,
    "key_file": str,
    "console_dir": str,
}


def load_config(path: str | None = None, env: dict | None = None) -> ServiceConfig:
    """Config file is key=value lines; CHAINVOICE_* environment overrides it."""
    values: dict[str, object] = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.strip()
    env = os.environ if env is None else env
    for key in _CONFIG_FIELDS:
        env_val = env.get(ENV_PREFIX + key.upper())
        if env_val is not None:
            values[key] = env_val
    for key, caster in _CONFIG_FIELDS.items():
        if key in values and caster is int:
            try:
                values[key] = int(values[key])
            except ValueError:
                raise ConfigError(f"config key {key} must be an integer") from None
    config = ServiceConfig(**values)  # type: ignore[arg-type]
    config.validate()
    return config


# --- API keys ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ApiKey:
    key: str
    account_id: str
    role: Role


def load_keys(path: str) -> dict[str, ApiKey]:
    try:
        records = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read key file {path}: {exc}") from None
    if not isinstance(records, list):
        raise ConfigError("key file must be a JSON list")
    keys: dict[str, ApiKey] = {}
    accounts: set[str] = set()
    for record in records:
        try:
            key = str(record["key"])
            account_id = str(record["account_id"])
            role = Role(record["role"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad key record: {exc}") from None
        if len(key.encode("utf-8")) < 16:
            raise ConfigError(f"key for {account_id} is shorter than 16 bytes")
        if account_id in accounts:
            raise ConfigError(f"more than one key for account {account_id}")
        if key in keys:
            raise ConfigError("duplicate key value in key file")
        accounts.add(account_id)
        keys[key] = ApiKey(key=key, account_id=account_id, role=role)
    return keys


def generate_key_records(accounts: list[tuple[str, Role]]) -> list[dict]:
    return [
        {"key": secrets.token_hex(16), "account_id": account_id, "role": role.value}
        for account_id, role in accounts
    ]


# --- persistence core ---------------------------------------------------------


class LedgerService:
    """Sealed chain + write-ahead log + the live contract state derived from both."""

    def __init__(self, data_dir: str, max_block_txs: int = 100):
        self.data_dir = Path(data_dir)
        self.max_block_txs = max_block_txs
        self.chain: Chain | None = None
        self.state = ContractState()
        self.pending: list[Transaction] = []
        # (tx, applied height, bill_id for CreateBill) aligned with the event log
        self.applied: list[tuple[Transaction, int, int | None]] = []
        self._chain_fp = None
        self._wal_fp = None

    # paths
    @property
    def chain_path(self) -> Path:
        return self.data_dir / CHAIN_FILE

    @property
    def wal_path(self) -> Path:
        return self.data_dir / WAL_FILE

    @property
    def chain_tx_count(self) -> int:
        assert self.chain is not None
        return sum(len(b.transactions) for b in self.chain.blocks)

    def _pending_height(self, position: int) -> int:
        assert self.chain is not None
        return self.chain.tip.height + 1 + position // self.max_block_txs

    # --- lifecycle -----------------------------------------------------

    def create(self, genesis_timestamp: int | None = None) -> None:
        """Initialise an empty data directory with a genesis block."""
        self.data_dir.mkdir(parents=True, exist_ok=True)
        if self.chain_path.exists():
            raise ConfigError(f"{self.chain_path} already exists")
        ts = int(time.time()) if genesis_timestamp is None else genesis_timestamp
        self.chain = new_chain("chainvoice", ts)
        with open(self.chain_path, "w", encoding="utf-8") as fp:
            fp.write(block_to_jsonl(self.chain.blocks[0]) + "\n")
            fp.flush()
            os.fsync(fp.fileno())
        self.wal_path.write_text("")

    def load(self) -> None:
        """Replay chain + wal; raises CorruptLog naming the height on any damage."""
        if not self.chain_path.exists():
            self.create()
        else:
            try:
                with open(self.chain_path, "r", encoding="utf-8") as fp:
                    blocks = read_chain_jsonl(fp)
            except DecodeError as exc:
                raise CorruptLog(getattr(exc, "height", 0), str(exc)) from None
            if not blocks:
                raise CorruptLog(0, "chain file is empty")
            self.chain = Chain(blocks=tuple(blocks))
        violation = validate_chain(self.chain)
        if violation is not None:
            raise CorruptLog(violation.height, f"chain violation: {violation.reason.value}")

        self.state = ContractState()
        self.applied = []
        for block in self.chain.blocks:
            for tx in block.transactions:
                self._apply_checked(tx, block.height, block.height)

        self.pending = []
        if self.wal_path.exists():
            sealed = self.chain_tx_count
            with open(self.wal_path, "r", encoding="utf-8") as fp:
                for lineno, line in enumerate(fp):
                    if not line.strip():
                        continue
                    entry_height = self.chain.tip.height + 1 + len(self.pending) // self.max_block_txs
                    try:
                        entry = json.loads(line)
                        seq = int(entry["seq"])
                        tx = tx_from_json(entry["tx"])
                        recorded_hash = str(entry["tx_hash"])
                        recorded_height = int(entry["height"])
                    except (json.JSONDecodeError, DecodeError, KeyError, TypeError, ValueError) as exc:
                        raise CorruptLog(entry_height, f"bad wal line {lineno}: {exc}") from None
                    if tx_hash(tx).hex() != recorded_hash:
                        raise CorruptLog(entry_height, f"wal line {lineno} hash mismatch")
                    if seq < sealed:
                        continue  # already sealed into the chain before the crash
                    if seq != sealed + len(self.pending):
                        raise CorruptLog(entry_height, f"wal line {lineno} out of sequence")
                    height = self._pending_height(len(self.pending))
                    if recorded_height != height:
                        raise CorruptLog(entry_height, f"wal line {lineno} height mismatch")
                    try:
                        self._apply_checked(tx, height, entry_height)
                    except CorruptLog:
                        raise
                    self.pending.append(tx)
        else:
            self.wal_path.write_text("")

    def _apply_checked(self, tx: Transaction, height: int, fail_height: int) -> None:
        before = self.state.bill_counter
        try:
            apply_transaction(self.state, tx, height)
        except TxError as exc:
            raise CorruptLog(fail_height, f"recorded transaction no longer applies: {exc}") from None
        bill_id = self.state.bill_counter if self.state.bill_counter != before else None
        self.applied.append((tx, height, bill_id))

    def close(self) -> None:
        for fp in (self._chain_fp, self._wal_fp):
            if fp is not None:
                fp.close()
        self._chain_fp = None
        self._wal_fp = None

    # --- writes ----------------------------------------------------------

    def accept_tx(self, tx: Transaction) -> list:
        """Validate, apply to live state, and durably append to the wal."""
        assert self.chain is not None
        height = self._pending_height(len(self.pending))
        before = self.state.bill_counter
        events = apply_transaction(self.state, tx, height)  # raises TxError
        bill_id = self.state.bill_counter if self.state.bill_counter != before else None
        self.applied.append((tx, height, bill_id))
        seq = self.chain_tx_count + len(self.pending)
        self.pending.append(tx)
        record = {
            "seq": seq,
            "height": height,
            "tx": tx_to_json(tx),
            "tx_hash": tx_hash(tx).hex(),
        }
        if self._wal_fp is None:
            self._wal_fp = open(self.wal_path, "a", encoding="utf-8")
        self._wal_fp.write(dumps_canonical(record) + "\n")
        self._wal_fp.flush()
        os.fsync(self._wal_fp.fileno())
        return events

    def seal_pending(self, timestamp: int | None = None) -> list:
        """Drain the whole pending queue into blocks of at most max_block_txs."""
        assert self.chain is not None
        if not self.pending:
            return []
        ts = int(time.time()) if timestamp is None else timestamp
        ts = max(ts, self.chain.tip.timestamp)
        sealed_blocks = []
        queue = self.pending
        if self._chain_fp is None:
            self._chain_fp = open(self.chain_path, "a", encoding="utf-8")
        for start in range(0, len(queue), self.max_block_txs):
            batch = queue[start : start + self.max_block_txs]
            self.chain = append_block(self.chain, batch, SERVICE_PROPOSER, ts)
            block = self.chain.tip
            sealed_blocks.append(block)
            self._chain_fp.write(block_to_jsonl(block) + "\n")
        self._chain_fp.flush()
        os.fsync(self._chain_fp.fileno())
        self.pending = []
        # atomically reset the wal now that everything in it is sealed
        if self._wal_fp is not None:
            self._wal_fp.close()
            self._wal_fp = None
        tmp = self.wal_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fp:
            fp.flush()
            os.fsync(fp.fileno())
        os.replace(tmp, self.wal_path)
        return sealed_blocks

    # --- reads ----------------------------------------------------------

    def verify(self):
        assert self.chain is not None
        return validate_chain(self.chain)

    def events_since(self, since: int) -> tuple[list[dict], int]:
        log = self.state.event_log
        items = []
        for index in range(max(since, 0), len(log)):
            body = event_to_json(log[index])
            body["seq"] = index + 1
            items.append(body)
        return items, len(log)


# --- request router / HTTP server ---------------------------------------------


def _json_error(status: int, code: str, detail: str) -> tuple[int, dict]:
    return status, {"error": code, "detail": detail}


_TX_ERROR_STATUS = {
    "UnknownAccount": 404,
    "UnknownBill": 404,
    "DuplicateAccount": 409,
    "AlreadyPaid": 409,
    "AmountMismatch": 422,
    "InvalidAmount": 422,
    "InsufficientFunds": 422,
    "MemoTooLong": 422,
    "PayloadTooLong": 422,
    "InvalidPeriod": 422,
    "InvalidAccountId": 422,
    "NotAShopkeeper": 422,
    "RoleMismatch": 403,
}


def _bill_json(bill: Bill, redact_memo: bool, paid_period: str | None) -> dict:
    return {
        "bill_id": bill.bill_id,
        "payee": bill.payee,
        "amount": bill.amount,
        "tax_amount": bill.tax_amount,
        "memo": REDACTED if redact_memo else bill.memo,
        "status": bill.status,
        "payer": bill.payer,
        "created_at_height": bill.created_at_height,
        "paid_at_height": bill.paid_at_height,
        # YYYY-MM of the sealing block once the payment is on chain; lets a
        # payer query the seller's remittance report for the right period
        "paid_period": paid_period,
    }


class ApiServer:
    """Routes HTTP requests onto the ledger service under a single lock."""

    def __init__(self, ledger: LedgerService, keys: dict[str, ApiKey], config: ServiceConfig):
        self.ledger = ledger
        self.keys = keys
        self.config = config
        self.lock = threading.RLock()

    # --- helpers ---------------------------------------------------------

    def _auth(self, headers: dict) -> ApiKey | None:
        key = headers.get("x-api-key")
        if key is None:
            return None
        return self.keys.get(key)

    def _bill_visible(self, caller: ApiKey, bill: Bill) -> tuple[bool, bool]:
        """(visible, memo redacted) for a bill record under the caller's role."""
        role = caller.role
        if role in FULL_VIEW_ROLES:
            return True, False
        if role is Role.OTHER_AUTHORITY:
            return True, True
        if role is Role.SHOPKEEPER:
            return bill.payee == caller.account_id or bill.payer == caller.account_id, False
        return bill.status != PAID or bill.payer == caller.account_id, False

    def _paid_period(self, bill: Bill) -> str | None:
        """Period of the sealed paying block; None while unpaid or unsealed."""
        chain = self.ledger.chain
        assert chain is not None
        if bill.paid_at_height is None or bill.paid_at_height > chain.tip.height:
            return None
        return period_of_timestamp(chain.blocks[bill.paid_at_height].timestamp)

    # --- entry point -----------------------------------------------------

    def handle_request(
        self, method: str, path: str, headers: dict, body: bytes | None
    ) -> tuple[int, dict | list]:
        """Route one request; returns (status, JSON-serialisable body)."""
        headers = {k.lower(): v for k, v in headers.items()}
        parsed = urlparse(path)
        route = parsed.path.rstrip("/") or "/"
        query = {k: v[-1] for k, v in parse_qs(parsed.query).items()}

        payload: dict | None = None
        if method == "POST":
            if body:
                try:
                    payload = json.loads(body.decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                    return _json_error(400, "MalformedJson", str(exc))
                if not isinstance(payload, dict):
                    return _json_error(400, "MalformedJson", "body must be a JSON object")
            else:
                payload = {}

        caller = self._auth(headers)
        if caller is None:
            return _json_error(401, "Unauthorized", "missing or unknown API key")

        try:
            with self.lock:
                return self._route(method, route, query, payload, caller)
        except TxError as exc:
            status = _TX_ERROR_STATUS.get(exc.code, 422)
            return _json_error(status, exc.code, str(exc))
        except DecodeError as exc:
            return _json_error(400, "MalformedJson", str(exc))

    # --- routing ----------------------------------------------------------

    def _route(
        self, method: str, route: str, query: dict, payload: dict | None, caller: ApiKey
    ) -> tuple[int, dict | list]:
        parts = [p for p in route.split("/") if p]

        if method == "POST":
            if self.config.mode == MODE_SIMULATION:
                return _json_error(403, "ReadOnly", "service is in simulation-attached mode")
            if parts == ["accounts"]:
                return self._post_accounts(payload or {}, caller)
            if parts == ["bills"]:
                return self._post_bills(payload or {}, caller)
            if len(parts) == 3 and parts[0] == "bills" and parts[2] == "pay":
                return self._post_pay(parts[1], payload or {}, caller)
            if parts == ["remittances"]:
                return self._post_remittances(payload or {}, caller)
            if parts == ["documents"]:
                return self._post_documents(payload or {}, caller)
            return _json_error(404, "NotFound", f"no such endpoint: POST {route}")

        if method != "GET":
            return _json_error(405, "MethodNotAllowed", method)

        if parts == ["me"]:
            return self._get_me(caller)
        if len(parts) == 2 and parts[0] == "accounts":
            return self._get_account(parts[1], caller)
        if len(parts) == 2 and parts[0] == "bills":
            return self._get_bill(parts[1], caller)
        if parts == ["bills"]:
            return self._get_bills(query, caller)
        if parts == ["chain"]:
            return self._get_chain(caller)
        if parts == ["chain", "verify"]:
            return self._get_verify()
        if parts == ["reports", "tax"]:
            return self._get_report(query, caller)
        if parts == ["flags"]:
            return self._get_flags(query, caller)
        if parts == ["events"]:
            return self._get_events(query, caller)
        if parts == ["view"]:
            return self._get_view(caller)
        return _json_error(404, "NotFound", f"no such endpoint: GET {route}")

    # --- write endpoints ---------------------------------------------------

    @staticmethod
    def _field(payload: dict, name: str, kind: type):
        if name not in payload:
            raise DecodeError(f"missing field: {name}")
        value = payload[name]
        if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise DecodeError(f"field {name} must be an integer")
        if kind is str and not isinstance(value, str):
            raise DecodeError(f"field {name} must be a string")
        return value

    def _post_accounts(self, payload: dict, caller: ApiKey) -> tuple[int, dict]:
        account_id = self._field(payload, "account_id", str)
        role_name = self._field(payload, "role", str)
        initial_balance = self._field(payload, "initial_balance", int)
        try:
            role = Role(role_name)
        except ValueError:
            raise DecodeError(f"unknown role: {role_name}") from None
        self_registration = account_id == caller.account_id and role is caller.role
        if not (self_registration or caller.role in FULL_VIEW_ROLES):
            return _json_error(
                403, "Forbidden", "only tax authorities may register other accounts"
            )
        self.ledger.accept_tx(RegisterAccount(account_id, role, initial_balance))
        return 201, {"account_id": account_id, "role": role.value, "balance": initial_balance}

    def _post_bills(self, payload: dict, caller: ApiKey) -> tuple[int, dict]:
        payee = self._field(payload, "payee", str)
        if caller.role is not Role.SHOPKEEPER:
            return _json_error(403, "Forbidden", "only shopkeepers create bills")
        if payee != caller.account_id:
            return _json_error(403, "Forbidden", "payee must be the calling shopkeeper")
        tx = CreateBill(
            payee=payee,
            amount=self._field(payload, "amount", int),
            tax_amount=self._field(payload, "tax_amount", int),
            memo=self._field(payload, "memo", str),
        )
        self.ledger.accept_tx(tx)
        return 201, {"bill_id": self.ledger.state.bill_counter}

    def _post_pay(self, bill_id_raw: str, payload: dict, caller: ApiKey) -> tuple[int, dict]:
        try:
            bill_id = int(bill_id_raw)
        except ValueError:
            raise UnknownBill(f"bad bill id: {bill_id_raw}") from None
        value = self._field(payload, "value", int)
        self.ledger.accept_tx(PayBill(bill_id=bill_id, payer=caller.account_id, value=value))
        bill = self.ledger.state.query_bill(bill_id)
        return 200, {
            "bill_id": bill_id,
            "payer": caller.account_id,
            "value": value,
            "status": bill.status,
        }

    def _post_remittances(self, payload: dict, caller: ApiKey) -> tuple[int, dict]:
        seller = self._field(payload, "seller", str)
        if caller.role is not Role.SHOPKEEPER:
            return _json_error(403, "Forbidden", "only shopkeepers remit tax")
        if seller != caller.account_id:
            return _json_error(403, "Forbidden", "seller must be the calling shopkeeper")
        tx = TaxRemittance(
            seller=seller,
            amount=self._field(payload, "amount", int),
            period=self._field(payload, "period", str),
        )
        self.ledger.accept_tx(tx)
        return 201, {"seller": seller, "amount": tx.amount, "period": tx.period}

    def _post_documents(self, payload: dict, caller: ApiKey) -> tuple[int, dict]:
        if caller.role not in (
            Role.STATE_TAX_AUTHORITY,
            Role.CENTRAL_TAX_AUTHORITY,
            Role.OTHER_AUTHORITY,
        ):
            return _json_error(403, "Forbidden", "only authorities file tax documents")
        kind_name = self._field(payload, "kind", str)
        try:
            kind = DocKind(kind_name)
        except ValueError:
            raise DecodeError(f"unknown document kind: {kind_name}") from None
        tx = TaxDocument(
            kind=kind,
            subject=self._field(payload, "subject", str),
            payload=self._field(payload, "payload", str),
        )
        self.ledger.accept_tx(tx)
        return 201, {"kind": kind.value, "subject": tx.subject}

    # --- read endpoints ---------------------------------------------------

    def _get_me(self, caller: ApiKey) -> tuple[int, dict]:
        account = self.ledger.state.accounts.get(caller.account_id)
        return 200, {
            "account_id": caller.account_id,
            "role": caller.role.value,
            "registered": account is not None,
            "balance": account.balance if account is not None else None,
        }

    def _get_account(self, account_id: str, caller: ApiKey) -> tuple[int, dict]:
        if caller.account_id != account_id and caller.role not in FULL_VIEW_ROLES:
            return _json_error(403, "Forbidden", "cannot view other accounts")
        account = self.ledger.state.accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"no such account: {account_id}")
        return 200, {
            "account_id": account.account_id,
            "role": account.role.value,
            "balance": account.balance,
        }

    def _get_bill(self, bill_id_raw: str, caller: ApiKey) -> tuple[int, dict]:
        try:
            bill_id = int(bill_id_raw)
        except ValueError:
            raise UnknownBill(f"bad bill id: {bill_id_raw}") from None
        bill = self.ledger.state.query_bill(bill_id)
        visible, redact_memo = self._bill_visible(caller, bill)
        if not visible:
            return _json_error(403, "Forbidden", "bill is outside your view")
        return 200, _bill_json(bill, redact_memo, self._paid_period(bill))

    def _get_bills(self, query: dict, caller: ApiKey) -> tuple[int, dict]:
        payee = query.get("payee")
        status = query.get("status")
        if status is not None and status not in (UNPAID, PAID):
            return _json_error(400, "MalformedJson", f"bad status filter: {status}")
        bills = []
        for bill_id in sorted(self.ledger.state.bills):
            bill = self.ledger.state.bills[bill_id]
            if payee is not None and bill.payee != payee:
                continue
            if status is not None and bill.status != status:
                continue
            visible, redact_memo = self._bill_visible(caller, bill)
            if visible:
                bills.append(_bill_json(bill, redact_memo, self._paid_period(bill)))
        return 200, {"bills": bills}

    def _get_chain(self, caller: ApiKey) -> tuple[int, dict]:
        if caller.role not in FULL_VIEW_ROLES:
            return _json_error(403, "Forbidden", "full chain access is authority-only")
        assert self.ledger.chain is not None
        return 200, {"blocks": [block_to_json(b) for b in self.ledger.chain.blocks]}

    def _get_verify(self) -> tuple[int, dict]:
        violation = self.ledger.verify()
        if violation is None:
            assert self.ledger.chain is not None
            return 200, {"ok": True, "height": self.ledger.chain.tip.height}
        return 200, {
            "ok": False,
            "violation": {"height": violation.height, "reason": violation.reason.value},
        }

    def _report_allowed(self, caller: ApiKey, seller: str) -> bool:
        if caller.role in FULL_VIEW_ROLES:
            return True
        if caller.role is Role.SHOPKEEPER:
            return seller == caller.account_id
        if caller.role is Role.CUSTOMER:
            assert self.ledger.chain is not None
            ctx = ViewContext(self.ledger.chain)
            return seller in ctx.sellers_paid_by.get(caller.account_id, ())
        return False

    def _get_report(self, query: dict, caller: ApiKey) -> tuple[int, dict]:
        seller = query.get("seller")
        period = query.get("period")
        if not seller or not period:
            return _json_error(400, "MalformedJson", "seller and period are required")
        if not self._report_allowed(caller, seller):
            return _json_error(403, "Forbidden", "report is outside your view")
        assert self.ledger.chain is not None
        report = tax_report(self.ledger.chain, seller, period)
        return 200, report.to_json()

    def _get_flags(self, query: dict, caller: ApiKey) -> tuple[int, list]:
        period = query.get("period")
        if not period:
            return _json_error(400, "MalformedJson", "period is required")
        if caller.role not in FULL_VIEW_ROLES:
            return _json_error(403, "Forbidden", "evasion flags are authority-only")
        assert self.ledger.chain is not None
        return 200, flags_to_json(flag_evasion(self.ledger.chain, period))

    def _get_events(self, query: dict, caller: ApiKey) -> tuple[int, dict]:
        try:
            since = int(query.get("since", "0"))
        except ValueError:
            return _json_error(400, "MalformedJson", "since must be an integer")
        items, next_cursor = self.ledger.events_since(since)
        policy = POLICY_TABLE[caller.role]
        ctx = ViewContext.from_state(self.ledger.state)
        visible = []
        for item in items:
            tx, _, bill_id = self.ledger.applied[item["seq"] - 1]
            rule = policy.rules[type(tx)]
            if rule is Rule.NONE:
                continue
            if rule is Rule.OWN_ONLY and not is_own_record(
                caller.account_id, caller.role, tx, ctx, bill_id
            ):
                continue
            if "memo" in policy.redact.get(type(tx), ()) and "memo" in item:
                item = dict(item, memo=REDACTED)
            visible.append(item)
        return 200, {"events": visible, "next": next_cursor}

    def _get_view(self, caller: ApiKey) -> tuple[int, dict]:
        assert self.ledger.chain is not None
        records = visible_records(self.ledger.chain, caller.account_id, caller.role)
        return 200, {
            "records": [{"height": h, "tx": tx_to_json(tx)} for h, tx in records]
        }


# --- HTTP plumbing -------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    server_version = "chainvoice/0.1"
    api: ApiServer = None  # type: ignore[assignment]

    def _dispatch(self, method: str) -> None:
        if self.api.config.console_dir and method == "GET" and self._try_static():
            return
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else None
        status, payload = self.api.handle_request(
            method, self.path, dict(self.headers.items()), body
        )
        raw = dumps_canonical(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def _try_static(self) -> bool:
        route = urlparse(self.path).path
        if route == "/":
            route = "/index.html"
        base = Path(self.api.config.console_dir).resolve()
        target = (base / route.lstrip("/")).resolve()
        if not target.is_relative_to(base) or not target.is_file():
            return False
        content_types = {
            ".html": "text/html",
            ".js": "text/javascript",
            ".css": "text/css",
            ".json": "application/json",
            ".map": "application/json",
        }
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", content_types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def do_GET(self) -> None:  # noqa: N802
        self._dispatch("GET")

    def do_POST(self) -> None:  # noqa: N802
        self._dispatch("POST")

    def log_message(self, format: str, *args) -> None:  # silence request logging
        del format, args


class ServiceRuntime:
    """A running service: HTTP listener plus the block-sealing ticker."""

    def __init__(self, config: ServiceConfig, keys: dict[str, ApiKey]):
        config.validate()
        self.config = config
        self.ledger = LedgerService(config.data_dir, config.max_block_txs)
        self.ledger.load()
        self.api = ApiServer(self.ledger, keys, config)
        handler = type("BoundHandler", (_Handler,), {"api": self.api})
        self.httpd = ThreadingHTTPServer((config.host, config.port), handler)
        self._stop = threading.Event()
        self._ticker: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def _tick_loop(self) -> None:
        while not self._stop.wait(self.config.block_interval):
            with self.api.lock:
                self.ledger.seal_pending()

    def start(self) -> None:
        if self.config.mode == MODE_STANDALONE:
            self._ticker = threading.Thread(target=self._tick_loop, daemon=True)
            self._ticker.start()
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def stop(self) -> None:
        self._stop.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        self.ledger.close()

    def run_forever(self) -> None:
        self.start()
        self._stop.wait()


def serve(config: ServiceConfig, keys: dict[str, ApiKey]) -> None:
    """Run until SIGINT/SIGTERM; startup failures on a corrupt log are fatal."""
    runtime = ServiceRuntime(config, keys)

    def _signal(_sig, _frame):
        runtime.stop()

    signal.signal(signal.SIGINT, _signal)
    signal.signal(signal.SIGTERM, _signal)
    host, port = runtime.address
    print(f"chainvoice service on http://{host}:{port} data={config.data_dir}")
    runtime.run_forever()
