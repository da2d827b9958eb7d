"""Text format for fingerprint logs.

One record per line: the position as D comma-separated floats (meters)
followed by whitespace-separated key:value pairs, e.g.

    1.25,3.50 17:-62.0 42:-71.5

Keys are unsigned integers, unique within a line; values must be finite.
The same format carries survey records, test sets (position = ground
truth) and bare user fingerprints (position ignored by consumers).
"""

from __future__ import annotations

from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .model import KEY_DTYPE, Fingerprint, ReferenceRecord


def _parse_line(line: str, lineno: int) -> ReferenceRecord:
    tokens = line.split()
    coords = tokens[0].split(",")
    if len(coords) != 2:
        raise ValueError(f"line {lineno}: expected 'x,y' position, got {tokens[0]!r}")
    try:
        position = np.array([float(c) for c in coords])
    except ValueError:
        raise ValueError(f"line {lineno}: malformed position {tokens[0]!r}") from None
    if not np.all(np.isfinite(position)):
        raise ValueError(f"line {lineno}: non-finite position")

    keys: list[int] = []
    values: list[float] = []
    seen: set[int] = set()
    for token in tokens[1:]:
        key_str, sep, value_str = token.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: malformed pair {token!r}")
        try:
            key = int(key_str)
            value = float(value_str)
        except ValueError:
            raise ValueError(f"line {lineno}: malformed pair {token!r}") from None
        if key < 0:
            raise ValueError(f"line {lineno}: negative feature key {key}")
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate feature key {key}")
        if not np.isfinite(value):
            raise ValueError(f"line {lineno}: non-finite value for key {key}")
        seen.add(key)
        keys.append(key)
        values.append(value)

    order = np.argsort(np.array(keys, dtype=KEY_DTYPE)) if keys else []
    fp = Fingerprint(
        np.array(keys, dtype=KEY_DTYPE)[order] if keys else np.empty(0, KEY_DTYPE),
        np.array(values, dtype=np.float64)[order] if keys else np.empty(0),
    )
    return ReferenceRecord(fp, position)


def read_records(source: str | Path | IO[str]) -> list[ReferenceRecord]:
    """Parse a fingerprint log; raises ValueError naming the offending line."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text().splitlines()
    records = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        records.append(_parse_line(line, lineno))
    return records


def format_record(record: ReferenceRecord) -> str:
    pos = record.position
    pairs = " ".join(
        f"{int(k)}:{float(v)!r}"
        for k, v in zip(record.fingerprint.keys, record.fingerprint.values)
    )
    head = f"{float(pos[0])!r},{float(pos[1])!r}"
    return f"{head} {pairs}" if pairs else head


def write_records(
    target: str | Path | IO[str], records: Iterable[ReferenceRecord]
) -> None:
    """Write records in the fingerprint-log format (floats via repr, lossless)."""
    text = "".join(format_record(r) + "\n" for r in records)
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)


def to_testset(records: Sequence[ReferenceRecord]) -> list[tuple[Fingerprint, np.ndarray]]:
    """View log records as (fingerprint, true position) evaluation pairs."""
    return [(r.fingerprint, r.position) for r in records]
