"""Core fingerprint / radio-map data model shared by all pipeline stages.

A fingerprint is a sorted associative array of (feature key, value) pairs,
where a key identifies one observable feature (e.g. the hash of a WLAN
access point's MAC address) and the value is the measured quantity in the
feature's native units (dBm for RSS).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Fill value for features absent from a fingerprint, chosen below any
# observable WLAN RSS.
MISSING_VALUE_DBM = -110.0

KEY_DTYPE = np.uint64


def feature_key(identifier: str | bytes) -> int:
    """Stable 64-bit key for a feature identifier (e.g. an AP MAC address).

    Equal identifiers map to equal keys across runs and platforms, so
    caches built in one process remain valid in another.
    """
    if isinstance(identifier, str):
        identifier = identifier.encode("utf-8")
    digest = hashlib.blake2b(identifier, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _as_key_array(keys) -> np.ndarray:
    arr = np.asarray(keys, dtype=KEY_DTYPE)
    if arr.ndim != 1:
        raise ValueError("keys must be one-dimensional")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Fingerprint:
    """Observations at one location: strictly increasing keys, one value each."""

    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        keys = _as_key_array(self.keys)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(keys) != len(values):
            raise ValueError("keys and values must be vectors of equal length")
        if len(keys) > 1 and not np.all(keys[1:] > keys[:-1]):
            raise ValueError("fingerprint keys must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("fingerprint values must be finite")
        object.__setattr__(self, "keys", _freeze(keys))
        object.__setattr__(self, "values", _freeze(values))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "Fingerprint":
        """Build from unordered (key, value) pairs; duplicate keys are rejected."""
        items = list(pairs)
        items.sort(key=lambda kv: kv[0])
        keys = [k for k, _ in items]
        for a, b in zip(keys, keys[1:]):
            if a == b:
                raise ValueError(f"duplicate feature key {a}")
        return cls(
            np.array(keys, dtype=KEY_DTYPE),
            np.array([v for _, v in items], dtype=np.float64),
        )

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class ReferenceRecord:
    """A fingerprint tied to a known 2-D position (meters)."""

    fingerprint: Fingerprint
    position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.shape != (2,):
            raise ValueError("position must be a 2-vector (planar positioning)")
        if not np.all(np.isfinite(pos)):
            raise ValueError("position must be finite")
        object.__setattr__(self, "position", _freeze(pos))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, min/max corners in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle must have positive extent")

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        return (
            (xy[:, 0] >= self.xmin)
            & (xy[:, 0] <= self.xmax)
            & (xy[:, 1] >= self.ymin)
            & (xy[:, 1] <= self.ymax)
        )

    @property
    def center(self) -> np.ndarray:
        return np.array(
            [(self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0]
        )


def key_union(records: Sequence[ReferenceRecord]) -> np.ndarray:
    """Sorted, duplicate-free union of the key sets of all records."""
    if not records:
        return _freeze(np.empty(0, dtype=KEY_DTYPE))
    return _freeze(np.unique(np.concatenate([r.fingerprint.keys for r in records])))


def feature_vector(
    record: ReferenceRecord, keys: np.ndarray, missing_value: float
) -> np.ndarray:
    """Dense vector of the record's values in `keys` order.

    Positions whose key the record did not observe carry `missing_value`;
    record keys absent from `keys` are dropped.
    """
    keys = _as_key_array(keys)
    out = np.full(len(keys), missing_value, dtype=np.float64)
    fp = record.fingerprint
    if len(fp) and len(keys):
        pos = np.searchsorted(keys, fp.keys)
        pos_clipped = np.minimum(pos, len(keys) - 1)
        hit = keys[pos_clipped] == fp.keys
        out[pos_clipped[hit]] = fp.values[hit]
    return out


@dataclass(frozen=True)
class SubRegion:
    """One square tile of the region of interest with its gridded records."""

    index: int
    bounds: Rect
    reference_points: tuple[ReferenceRecord, ...]
    key_union: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "reference_points", tuple(self.reference_points))
        object.__setattr__(self, "key_union", _freeze(_as_key_array(self.key_union)))
        positions = np.array([r.position for r in self.reference_points])
        if len(positions) and not np.all(self.bounds.contains(positions)):
            raise ValueError("reference points must lie inside the sub-region bounds")

    @classmethod
    def build(
        cls, index: int, bounds: Rect, records: Sequence[ReferenceRecord]
    ) -> "SubRegion":
        return cls(index, bounds, tuple(records), key_union(records))

    @property
    def positions(self) -> np.ndarray:
        return np.array([r.position for r in self.reference_points])


@dataclass(frozen=True)
class GriddedRFM:
    """Regular-grid reference fingerprint map partitioned into sub-regions."""

    sub_regions: tuple[SubRegion, ...]
    cell_size: float
    grid_spacing: float
    roi_key_union: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sub_regions", tuple(self.sub_regions))
        object.__setattr__(
            self, "roi_key_union", _freeze(_as_key_array(self.roi_key_union))
        )
        if not self.sub_regions:
            raise ValueError("gridded RFM must contain at least one sub-region")
        counts = {len(s.reference_points) for s in self.sub_regions}
        if len(counts) != 1:
            raise ValueError("all sub-regions must hold the same number of points")
        merged = np.unique(np.concatenate([s.key_union for s in self.sub_regions]))
        if not np.array_equal(merged, self.roi_key_union):
            raise ValueError("roi_key_union must equal the union over sub-regions")

    @property
    def n_sub_regions(self) -> int:
        return len(self.sub_regions)

    @property
    def points_per_region(self) -> int:
        return len(self.sub_regions[0].reference_points)
