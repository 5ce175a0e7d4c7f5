"""Message-stream parsing and identity normalization.

Input is line oriented. Two wire formats are supported:

* ``jsonl`` (default): one object per line, for example
  ``{"id": "m1", "ts": 1074470400, "from": "ann@dept.univ.br",
  "to": ["bob@example.com"], "aux": "spam"}``. ``id`` is optional and is
  synthesized from the line number when absent. A ``truth`` field, when
  present, is carried through as a side channel for evaluation tooling;
  the engine itself never reads it. Other unknown fields are ignored.
* ``tsv``: ``ts<TAB>from<TAB>to1,to2,...<TAB>spam|ham``.

Senders are identified by the domain after the last ``@`` (lower-cased);
``--sender-identity full`` keeps the whole address instead. Recipients are
always full addresses, lower-cased and stripped. Lines starting with ``#``
and JSON objects whose only key is ``header`` are comments. Malformed data
lines are counted and skipped; when they outnumber the good ones at end of
stream the whole input is rejected with FormatError, since that usually
means the wrong format flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import FormatError, InvalidAddressError

SENDER_DOMAIN = "domain"
SENDER_FULL = "full"

_LABELS = ("spam", "ham")


@dataclass(slots=True, frozen=True)
class MessageRecord:
    """One normalized message event."""

    msg_id: str
    timestamp: int
    sender: str
    recipients: tuple[str, ...]
    aux_label: str          # "spam" | "ham"
    truth: str | None = None  # generator ground truth; engine never reads it


def normalize_sender(address: str, identity: str = SENDER_DOMAIN) -> str:
    """Sender identity: domain after the last '@', or the full address.

    An address without '@' is used whole (already a domain). Empty input
    raises InvalidAddressError.
    """
    addr = address.strip().lower()
    if not addr:
        raise InvalidAddressError("empty sender address")
    if identity == SENDER_FULL:
        return addr
    return addr.rsplit("@", 1)[-1] or addr


def normalize_recipient(address: str) -> str:
    """Recipient identity: the full address, lower-cased and stripped."""
    addr = address.strip().lower()
    if not addr or "@" not in addr:
        raise InvalidAddressError(f"not a full address: {address!r}")
    return addr


@dataclass(slots=True)
class ParseStats:
    lines: int = 0
    records: int = 0
    skipped: int = 0
    comments: int = 0


def _coerce_ts(v: object) -> int:
    if isinstance(v, bool):
        raise ValueError("bool timestamp")
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    raise ValueError(f"bad timestamp {v!r}")


def _normalize_recipients(raw: Iterable[str]) -> tuple[str, ...]:
    out: list[str] = []
    seen: set[str] = set()
    for addr in raw:
        if not isinstance(addr, str):
            raise InvalidAddressError(f"recipient not a string: {addr!r}")
        norm = normalize_recipient(addr)
        if norm not in seen:
            seen.add(norm)
            out.append(norm)
    if not out:
        raise InvalidAddressError("no recipients")
    return tuple(out)


def _parse_json_line(line: str, line_no: int, identity: str) -> MessageRecord | None:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("not an object")
    if set(obj) == {"header"}:
        return None
    raw_id = obj.get("id", f"m{line_no}")
    if isinstance(raw_id, (int, float)):
        raw_id = str(raw_id)
    if not isinstance(raw_id, str):
        raise ValueError("bad id")
    aux = obj["aux"]
    if not isinstance(aux, str) or aux.lower() not in _LABELS:
        raise ValueError(f"bad aux label {aux!r}")
    truth = obj.get("truth")
    if truth is not None:
        if not isinstance(truth, str) or truth.lower() not in _LABELS:
            raise ValueError(f"bad truth label {truth!r}")
        truth = truth.lower()
    to = obj["to"]
    if not isinstance(to, list):
        raise ValueError("'to' not a list")
    return MessageRecord(
        msg_id=raw_id,
        timestamp=_coerce_ts(obj["ts"]),
        sender=normalize_sender(obj["from"], identity),
        recipients=_normalize_recipients(to),
        aux_label=aux.lower(),
        truth=truth,
    )


def _parse_tsv_line(line: str, line_no: int, identity: str) -> MessageRecord:
    parts = line.split("\t")
    if len(parts) != 4:
        raise ValueError(f"expected 4 fields, got {len(parts)}")
    ts_raw, sender, to_raw, aux = parts
    aux = aux.strip().lower()
    if aux not in _LABELS:
        raise ValueError(f"bad aux label {aux!r}")
    return MessageRecord(
        msg_id=f"m{line_no}",
        timestamp=int(ts_raw.strip()),
        sender=normalize_sender(sender, identity),
        recipients=_normalize_recipients(to_raw.split(",")),
        aux_label=aux,
        truth=None,
    )


def parse_stream(
    lines: Iterable[str],
    fmt: str = "jsonl",
    sender_identity: str = SENDER_DOMAIN,
    stats: ParseStats | None = None,
) -> Iterator[MessageRecord]:
    """Yield MessageRecords from an iterable of text lines, in input order.

    Malformed lines are skipped and tallied in ``stats``. After the stream
    is exhausted, FormatError is raised if skipped lines outnumber parsed
    records (more than half the data lines were bad).
    """
    if fmt not in ("jsonl", "tsv"):
        raise FormatError(f"unknown format {fmt!r}")
    if stats is None:
        stats = ParseStats()
    json_mode = fmt == "jsonl"
    for line_no, raw in enumerate(lines, 1):
        stats.lines += 1
        line = raw.strip()
        if not line:
            stats.skipped += 1
            continue
        if line.startswith("#"):
            stats.comments += 1
            continue
        try:
            if json_mode:
                rec = _parse_json_line(line, line_no, sender_identity)
                if rec is None:
                    stats.comments += 1
                    continue
            else:
                rec = _parse_tsv_line(line, line_no, sender_identity)
        except (ValueError, KeyError, TypeError, AttributeError, InvalidAddressError):
            stats.skipped += 1
            continue
        stats.records += 1
        yield rec
    if stats.skipped > stats.records:
        raise FormatError(
            f"{stats.skipped} of {stats.skipped + stats.records} data lines "
            "malformed; wrong --format?"
        )


def read_records(
    path: str,
    fmt: str = "jsonl",
    sender_identity: str = SENDER_DOMAIN,
) -> tuple[list[MessageRecord], ParseStats]:
    """Parse a whole file into memory. Convenience wrapper over parse_stream."""
    stats = ParseStats()
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        records = list(parse_stream(fh, fmt, sender_identity, stats))
    return records, stats


def record_to_obj(record: MessageRecord) -> dict:
    """Wire-format dict for a record (jsonl line payload)."""
    obj = {
        "id": record.msg_id,
        "ts": record.timestamp,
        "from": record.sender,
        "to": list(record.recipients),
        "aux": record.aux_label,
    }
    if record.truth is not None:
        obj["truth"] = record.truth
    return obj


def write_jsonl(path: str, records: Iterable[MessageRecord], header: dict | None = None) -> int:
    """Write records as jsonl; returns the record count.

    The optional header dict is emitted first as {"header": ...}, which
    parse_stream treats as a comment, so the file reads back cleanly.
    """
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(record_to_obj(rec)) + "\n")
            n += 1
    return n
