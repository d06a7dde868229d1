"""Raw transfer records and their file formats.

A record is one transaction: a non-empty set of input addresses, a
non-empty list of ``(address, amount)`` outputs, and a UTC timestamp.
Amounts are kept as integer satoshis (fixed point, 8 decimal digits)
so that aggregation sums are exact; they are rendered back to decimal
BTC strings only at the file boundary.

Two interchange formats are supported:

* line-delimited JSON: one object per line with keys ``tx_id``,
  ``timestamp``, ``inputs`` (list of address strings) and ``outputs``
  (list of ``[address, amount]`` pairs);
* CSV with header ``tx_id,timestamp,inputs,outputs`` where ``inputs``
  is ``;``-separated and ``outputs`` is ``;``-separated
  ``address:amount`` pairs.

Timestamps are ISO-8601 and interpreted as UTC (a missing offset means
UTC; ``Z`` is accepted).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError, RecordError

log = logging.getLogger(__name__)

SATS_PER_BTC = 10**8

# Default epoch bounds for timestamp validation; both configurable per read.
MIN_TIME = datetime(2009, 1, 3, tzinfo=timezone.utc)
MAX_TIME = datetime(2100, 1, 1, tzinfo=timezone.utc)


def parse_btc(value) -> int:
    """Parse a BTC amount into integer satoshis.

    Accepts decimal strings, ints and floats.  Anything finer than
    8 decimal digits or negative is rejected.
    """
    if isinstance(value, int) and not isinstance(value, bool):
        dec = Decimal(value)
    elif isinstance(value, float):
        dec = Decimal(repr(value))
    elif isinstance(value, str):
        try:
            dec = Decimal(value.strip())
        except InvalidOperation:
            raise DataError(f"invalid BTC amount {value!r}") from None
    else:
        raise DataError(f"invalid BTC amount {value!r}")
    scaled = dec * SATS_PER_BTC
    sats = int(scaled)
    if sats != scaled:
        raise DataError(f"amount {value!r} is finer than 1 satoshi")
    if sats < 0:
        raise DataError(f"amount {value!r} is negative")
    return sats


def format_btc(sats: int) -> str:
    """Render satoshis as a fixed 8-decimal BTC string."""
    if sats < 0:
        raise DataError(f"negative satoshi amount {sats}")
    whole, frac = divmod(sats, SATS_PER_BTC)
    return f"{whole}.{frac:08d}"


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp as a UTC instant (second resolution)."""
    if not isinstance(value, str):
        raise DataError(f"invalid timestamp {value!r}")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise DataError(f"invalid timestamp {value!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class TransferRecord:
    """One raw transaction: input addresses, amounted outputs, UTC time."""

    tx_id: str
    inputs: tuple[str, ...]
    outputs: tuple[tuple[str, int], ...]  # (address, satoshis)
    timestamp: datetime

    def __post_init__(self):
        if not self.inputs:
            raise DataError(f"tx {self.tx_id}: empty input list")
        if not self.outputs:
            raise DataError(f"tx {self.tx_id}: empty output list")
        for addr, sats in self.outputs:
            if sats < 0:
                raise DataError(f"tx {self.tx_id}: negative output to {addr}")
        if self.timestamp.tzinfo is None:
            raise DataError(f"tx {self.tx_id}: naive timestamp")

    @property
    def addresses(self) -> set[str]:
        """All addresses the record touches, inputs and outputs."""
        return set(self.inputs) | {addr for addr, _ in self.outputs}


def _record_from_parts(tx_id, timestamp, inputs, outputs, row=None):
    if not tx_id:
        raise RecordError("missing tx_id", row=row)
    try:
        ts = parse_timestamp(timestamp)
        outs = tuple((str(addr), parse_btc(amount)) for addr, amount in outputs)
        rec = TransferRecord(str(tx_id), tuple(str(a) for a in inputs), outs, ts)
    except DataError as exc:
        raise RecordError(str(exc), row=row, tx_id=str(tx_id)) from None
    return rec


def parse_record_json(line: str, row: int | None = None) -> TransferRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"invalid JSON ({exc.msg})", row=row) from None
    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object", row=row)
    try:
        tx_id = obj["tx_id"]
        timestamp = obj["timestamp"]
        inputs = obj["inputs"]
        raw_outputs = obj["outputs"]
    except KeyError as exc:
        raise RecordError(f"missing field {exc.args[0]!r}", row=row) from None
    outputs = []
    for entry in raw_outputs:
        if isinstance(entry, dict):
            try:
                outputs.append((entry["address"], entry["amount"]))
            except KeyError as exc:
                raise RecordError(
                    f"output missing {exc.args[0]!r}", row=row, tx_id=tx_id
                ) from None
        elif isinstance(entry, (list, tuple)) and len(entry) == 2:
            outputs.append((entry[0], entry[1]))
        else:
            raise RecordError(f"malformed output entry {entry!r}", row=row, tx_id=tx_id)
    return _record_from_parts(tx_id, timestamp, inputs, outputs, row=row)


def parse_record_csv(fields: dict, row: int | None = None) -> TransferRecord:
    tx_id = (fields.get("tx_id") or "").strip()
    timestamp = (fields.get("timestamp") or "").strip()
    inputs_raw = (fields.get("inputs") or "").strip()
    outputs_raw = (fields.get("outputs") or "").strip()
    if not inputs_raw:
        raise RecordError("empty inputs column", row=row, tx_id=tx_id or None)
    inputs = [a for a in inputs_raw.split(";") if a]
    outputs = []
    for part in outputs_raw.split(";"):
        if not part:
            continue
        addr, sep, amount = part.rpartition(":")
        if not sep or not addr:
            raise RecordError(
                f"malformed output {part!r}", row=row, tx_id=tx_id or None
            )
        outputs.append((addr, amount))
    if not outputs:
        raise RecordError("empty outputs column", row=row, tx_id=tx_id or None)
    return _record_from_parts(tx_id, timestamp, inputs, outputs, row=row)


def read_records(
    path,
    *,
    strict: bool = True,
    min_time: datetime = MIN_TIME,
    max_time: datetime = MAX_TIME,
) -> Iterator[TransferRecord]:
    """Stream transfer records from a JSONL or CSV file.

    The format is chosen by extension (``.csv`` vs anything else).  In
    strict mode a malformed row raises :class:`RecordError` with the row
    number; otherwise the row is skipped with a logged warning.
    Timestamps outside ``[min_time, max_time]`` count as malformed.
    """
    path = Path(path)
    parse_csv = path.suffix.lower() == ".csv"
    with open(path, newline="" if parse_csv else None, encoding="utf-8") as fh:
        if parse_csv:
            rows = ((i, f) for i, f in enumerate(csv.DictReader(fh), start=2))
            parse = parse_record_csv
        else:
            rows = (
                (i, line)
                for i, line in enumerate(fh, start=1)
                if line.strip()
            )
            parse = parse_record_json
        skipped = 0
        for row, payload in rows:
            try:
                rec = parse(payload, row=row)
                if not (min_time <= rec.timestamp <= max_time):
                    raise RecordError(
                        f"timestamp {format_timestamp(rec.timestamp)} outside "
                        f"epoch bounds",
                        row=row,
                        tx_id=rec.tx_id,
                    )
            except RecordError as exc:
                if strict:
                    raise
                skipped += 1
                log.warning("skipping record: %s", exc)
                continue
            yield rec
        if skipped:
            log.warning("skipped %d malformed records from %s", skipped, path)


def write_records_jsonl(records: Iterable[TransferRecord], path) -> int:
    """Write records as line-delimited JSON; returns the count written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "tx_id": rec.tx_id,
                "timestamp": format_timestamp(rec.timestamp),
                "inputs": list(rec.inputs),
                "outputs": [[addr, format_btc(sats)] for addr, sats in rec.outputs],
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
            n += 1
    return n


def write_records_csv(records: Iterable[TransferRecord], path) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tx_id", "timestamp", "inputs", "outputs"])
        for rec in records:
            outputs = ";".join(f"{a}:{format_btc(s)}" for a, s in rec.outputs)
            writer.writerow(
                [rec.tx_id, format_timestamp(rec.timestamp), ";".join(rec.inputs), outputs]
            )
            n += 1
    return n
