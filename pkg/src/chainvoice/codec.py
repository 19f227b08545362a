"""Canonical byte and JSON codecs for transactions and blocks.

The byte layout feeds every hash, so it is deterministic and strict:

* transactions: 1-byte variant tag (RegisterAccount=0, CreateBill=1, PayBill=2,
  TaxRemittance=3, TaxDocument=4), then each field in declaration order
* integers: 8-byte big-endian unsigned
* strings: 4-byte big-endian byte-length prefix + UTF-8 bytes
* enums: 1 byte, in declaration order of the enum
* block header: height || timestamp || prev_hash (32) || tx_root (32) ||
  proposer (length-prefixed)

Decoding is the exact inverse and rejects anything encode() could not have
produced (trailing bytes, bad enum values, invalid UTF-8), so the mapping
between values and encodings is one-to-one.

JSON is for interchange only and is never hashed. Blocks travel as one JSON
object per line (JSONL) with digests rendered as 64 lowercase hex characters.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import IO, Iterable

from .model import (
    DIGEST_LEN,
    CreateBill,
    DocKind,
    PayBill,
    RegisterAccount,
    Role,
    TaxDocument,
    TaxRemittance,
    Transaction,
)

U64_MAX = 2**64 - 1

TX_TAGS: dict[type, int] = {
    RegisterAccount: 0,
    CreateBill: 1,
    PayBill: 2,
    TaxRemittance: 3,
    TaxDocument: 4,
}

ROLE_BYTES = {role: i for i, role in enumerate(Role)}
ROLE_FROM_BYTE = {i: role for role, i in ROLE_BYTES.items()}
KIND_BYTES = {kind: i for i, kind in enumerate(DocKind)}
KIND_FROM_BYTE = {i: kind for kind, i in KIND_BYTES.items()}


class DecodeError(ValueError):
    """Raised when bytes or JSON do not form a valid canonical encoding."""


def encode_u64(value: int) -> bytes:
    if not 0 <= value <= U64_MAX:
        raise DecodeError(f"integer out of u64 range: {value}")
    return struct.pack(">Q", value)


def encode_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack(">I", len(raw)) + raw


class _Reader:
    """Strict cursor over a byte buffer; every read must fit and be valid."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError("truncated encoding")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def string(self) -> str:
        n = self.u32()
        raw = self.take(n)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"invalid UTF-8 in string field: {exc}") from None

    def byte(self) -> int:
        return self.take(1)[0]

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes after encoding")


def encode_tx(tx: Transaction) -> bytes:
    tag = TX_TAGS.get(type(tx))
    if tag is None:
        raise DecodeError(f"unknown transaction type: {type(tx).__name__}")
    parts = [bytes([tag])]
    if isinstance(tx, RegisterAccount):
        parts += [encode_str(tx.account_id), bytes([ROLE_BYTES[tx.role]]), encode_u64(tx.initial_balance)]
    elif isinstance(tx, CreateBill):
        parts += [encode_str(tx.payee), encode_u64(tx.amount), encode_u64(tx.tax_amount), encode_str(tx.memo)]
    elif isinstance(tx, PayBill):
        parts += [encode_u64(tx.bill_id), encode_str(tx.payer), encode_u64(tx.value)]
    elif isinstance(tx, TaxRemittance):
        parts += [encode_str(tx.seller), encode_u64(tx.amount), encode_str(tx.period)]
    else:
        parts += [bytes([KIND_BYTES[tx.kind]]), encode_str(tx.subject), encode_str(tx.payload)]
    return b"".join(parts)


def decode_tx(data: bytes) -> Transaction:
    r = _Reader(data)
    tag = r.byte()
    if tag == 0:
        account_id = r.string()
        role_b = r.byte()
        if role_b not in ROLE_FROM_BYTE:
            raise DecodeError(f"unknown role byte: {role_b}")
        tx: Transaction = RegisterAccount(account_id, ROLE_FROM_BYTE[role_b], r.u64())
    elif tag == 1:
        tx = CreateBill(r.string(), r.u64(), r.u64(), r.string())
    elif tag == 2:
        tx = PayBill(r.u64(), r.string(), r.u64())
    elif tag == 3:
        tx = TaxRemittance(r.string(), r.u64(), r.string())
    elif tag == 4:
        kind_b = r.byte()
        if kind_b not in KIND_FROM_BYTE:
            raise DecodeError(f"unknown document kind byte: {kind_b}")
        tx = TaxDocument(KIND_FROM_BYTE[kind_b], r.string(), r.string())
    else:
        raise DecodeError(f"unknown transaction tag: {tag}")
    r.done()
    return tx


def tx_hash(tx: Transaction) -> bytes:
    return hashlib.sha256(encode_tx(tx)).digest()


def encode_block_header(
    height: int, timestamp: int, prev_hash: bytes, tx_root: bytes, proposer: str
) -> bytes:
    if len(prev_hash) != DIGEST_LEN or len(tx_root) != DIGEST_LEN:
        raise DecodeError("digests must be exactly 32 bytes")
    return encode_u64(height) + encode_u64(timestamp) + prev_hash + tx_root + encode_str(proposer)


# --- JSON interchange -------------------------------------------------------

_JSON_SEP = (",", ":")


def _hex(digest: bytes) -> str:
    return digest.hex()


def _unhex(value: object, field: str) -> bytes:
    if not isinstance(value, str) or len(value) != DIGEST_LEN * 2 or value.lower() != value:
        raise DecodeError(f"{field} must be 64 lowercase hex characters")
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise DecodeError(f"{field} is not valid hex") from None


def _need(obj: dict, field: str, kind: type):
    if field not in obj:
        raise DecodeError(f"missing field: {field}")
    value = obj[field]
    if kind is int:
        # bool is an int subclass; reject it explicitly
        if isinstance(value, bool) or not isinstance(value, int):
            raise DecodeError(f"field {field} must be an integer")
    elif not isinstance(value, kind):
        raise DecodeError(f"field {field} must be {kind.__name__}")
    return value


def tx_to_json(tx: Transaction) -> dict:
    if isinstance(tx, RegisterAccount):
        return {
            "type": "RegisterAccount",
            "account_id": tx.account_id,
            "role": tx.role.value,
            "initial_balance": tx.initial_balance,
        }
    if isinstance(tx, CreateBill):
        return {
            "type": "CreateBill",
            "payee": tx.payee,
            "amount": tx.amount,
            "tax_amount": tx.tax_amount,
            "memo": tx.memo,
        }
    if isinstance(tx, PayBill):
        return {"type": "PayBill", "bill_id": tx.bill_id, "payer": tx.payer, "value": tx.value}
    if isinstance(tx, TaxRemittance):
        return {"type": "TaxRemittance", "seller": tx.seller, "amount": tx.amount, "period": tx.period}
    if isinstance(tx, TaxDocument):
        return {"type": "TaxDocument", "kind": tx.kind.value, "subject": tx.subject, "payload": tx.payload}
    raise DecodeError(f"unknown transaction type: {type(tx).__name__}")


def tx_from_json(obj: object) -> Transaction:
    if not isinstance(obj, dict):
        raise DecodeError("transaction must be a JSON object")
    tx_type = _need(obj, "type", str)
    if tx_type == "RegisterAccount":
        role_name = _need(obj, "role", str)
        try:
            role = Role(role_name)
        except ValueError:
            raise DecodeError(f"unknown role: {role_name}") from None
        return RegisterAccount(_need(obj, "account_id", str), role, _need(obj, "initial_balance", int))
    if tx_type == "CreateBill":
        return CreateBill(
            _need(obj, "payee", str),
            _need(obj, "amount", int),
            _need(obj, "tax_amount", int),
            _need(obj, "memo", str),
        )
    if tx_type == "PayBill":
        return PayBill(_need(obj, "bill_id", int), _need(obj, "payer", str), _need(obj, "value", int))
    if tx_type == "TaxRemittance":
        return TaxRemittance(_need(obj, "seller", str), _need(obj, "amount", int), _need(obj, "period", str))
    if tx_type == "TaxDocument":
        kind_name = _need(obj, "kind", str)
        try:
            kind = DocKind(kind_name)
        except ValueError:
            raise DecodeError(f"unknown document kind: {kind_name}") from None
        return TaxDocument(kind, _need(obj, "subject", str), _need(obj, "payload", str))
    raise DecodeError(f"unknown transaction type: {tx_type}")


def block_to_json(block) -> dict:
    return {
        "height": block.height,
        "timestamp": block.timestamp,
        "prev_hash": _hex(block.prev_hash),
        "tx_root": _hex(block.tx_root),
        "proposer": block.proposer,
        "block_hash": _hex(block.block_hash),
        "transactions": [tx_to_json(tx) for tx in block.transactions],
    }


def block_from_json(obj: object):
    from .ledger import Block  # local import to avoid a cycle

    if not isinstance(obj, dict):
        raise DecodeError("block must be a JSON object")
    txs_raw = _need(obj, "transactions", list)
    return Block(
        height=_need(obj, "height", int),
        timestamp=_need(obj, "timestamp", int),
        prev_hash=_unhex(obj.get("prev_hash"), "prev_hash"),
        tx_root=_unhex(obj.get("tx_root"), "tx_root"),
        transactions=tuple(tx_from_json(t) for t in txs_raw),
        proposer=_need(obj, "proposer", str),
        block_hash=_unhex(obj.get("block_hash"), "block_hash"),
    )


def dumps_canonical(obj) -> str:
    """Deterministic JSON: sorted keys, no insignificant whitespace, ASCII only."""
    return json.dumps(obj, sort_keys=True, separators=_JSON_SEP, ensure_ascii=True)


def block_to_jsonl(block) -> str:
    return dumps_canonical(block_to_json(block))


def write_chain_jsonl(blocks: Iterable, fp: IO[str]) -> None:
    for block in blocks:
        fp.write(block_to_jsonl(block))
        fp.write("\n")


def read_chain_jsonl(fp: IO[str]) -> list:
    """Parse a JSONL chain file; a bad line raises DecodeError tagged with its height."""
    blocks = []
    for height, line in enumerate(fp):
        if not line.strip():
            raise DecodeError(f"blank line at height {height}")
        try:
            obj = json.loads(line)
            blocks.append(block_from_json(obj))
        except DecodeError as exc:
            exc.height = height  # type: ignore[attr-defined]
            raise
        except (json.JSONDecodeError, ValueError) as exc:
            err = DecodeError(f"unparseable block line: {exc}")
            err.height = height  # type: ignore[attr-defined]
            raise err from None
    return blocks
