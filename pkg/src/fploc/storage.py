"""Versioned binary containers for gridded maps and positioning caches.

Both files are sequences of scalars (struct-packed, little-endian) and
arrays (npy-framed), so serialization is a pure function of content:
write -> read -> write reproduces the file byte for byte. A format-version
mismatch fails fast on load.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .features import RelevanceProfile
from .gridding import GridSpec
from .model import Fingerprint, GriddedRFM, Rect, ReferenceRecord, SubRegion, key_union
from .positioning import PrecomputedCache, RegionBlock

RFM_MAGIC = b"FPLRFM"
CACHE_MAGIC = b"FPLCCH"
RFM_FORMAT_VERSION = 1
CACHE_FORMAT_VERSION = 1


def _write_scalars(fp: BinaryIO, fmt: str, *values) -> None:
    fp.write(struct.pack("<" + fmt, *values))


def _read_scalars(fp: BinaryIO, fmt: str):
    fmt = "<" + fmt
    return struct.unpack(fmt, fp.read(struct.calcsize(fmt)))


def _write_array(fp: BinaryIO, arr: np.ndarray) -> None:
    np.lib.format.write_array(fp, np.ascontiguousarray(arr), version=(1, 0))


def _read_array(fp: BinaryIO) -> np.ndarray:
    return np.lib.format.read_array(fp)


def _check_header(fp: BinaryIO, magic: bytes, version: int, kind: str) -> None:
    got = fp.read(len(magic))
    if got != magic:
        raise ValueError(f"not a {kind} file")
    (file_version,) = _read_scalars(fp, "H")
    if file_version != version:
        raise ValueError(
            f"unsupported {kind} format version {file_version} (expected {version})"
        )


def _write_rect(fp: BinaryIO, rect: Rect) -> None:
    _write_scalars(fp, "dddd", rect.xmin, rect.ymin, rect.xmax, rect.ymax)


def _read_rect(fp: BinaryIO) -> Rect:
    return Rect(*_read_scalars(fp, "dddd"))


def save_rfm(path: str | Path, rfm: GriddedRFM) -> None:
    with open(path, "wb") as fp:
        fp.write(RFM_MAGIC)
        _write_scalars(fp, "H", RFM_FORMAT_VERSION)
        _write_scalars(fp, "dd", rfm.cell_size, rfm.grid_spacing)
        _write_scalars(fp, "I", len(rfm.sub_regions))
        for region in rfm.sub_regions:
            _write_scalars(fp, "I", region.index)
            _write_rect(fp, region.bounds)
            records = region.reference_points
            _write_array(fp, region.positions)
            _write_array(
                fp, np.array([len(r.fingerprint) for r in records], dtype=np.int64)
            )
            _write_array(fp, np.concatenate([r.fingerprint.keys for r in records]))
            _write_array(fp, np.concatenate([r.fingerprint.values for r in records]))


def load_rfm(path: str | Path) -> GriddedRFM:
    with open(path, "rb") as fp:
        _check_header(fp, RFM_MAGIC, RFM_FORMAT_VERSION, "gridded RFM")
        cell_size, grid_spacing = _read_scalars(fp, "dd")
        (n_regions,) = _read_scalars(fp, "I")
        regions = []
        for _ in range(n_regions):
            (index,) = _read_scalars(fp, "I")
            bounds = _read_rect(fp)
            positions = _read_array(fp)
            counts = _read_array(fp)
            keys = _read_array(fp)
            values = _read_array(fp)
            splits = np.cumsum(counts)[:-1]
            records = tuple(
                ReferenceRecord(Fingerprint(k, v), pos)
                for k, v, pos in zip(
                    np.split(keys, splits), np.split(values, splits), positions
                )
            )
            regions.append(SubRegion.build(index, bounds, records))
        roi_keys = key_union([r for s in regions for r in s.reference_points])
        return GriddedRFM(tuple(regions), cell_size, grid_spacing, roi_keys)


def save_cache(path: str | Path, cache: PrecomputedCache) -> None:
    with open(path, "wb") as fp:
        fp.write(CACHE_MAGIC)
        _write_scalars(fp, "H", CACHE_FORMAT_VERSION)
        _write_scalars(
            fp,
            "ddddBd",
            cache.grid.cell_size,
            cache.grid.grid_spacing,
            cache.missing_value,
            cache.pooling_radius,
            cache.full,
            cache.bandwidth_floor,
        )
        _write_array(fp, cache.roi_key_union)
        _write_scalars(fp, "I", len(cache.regions))
        for block in cache.regions:
            _write_scalars(fp, "I", block.index)
            _write_rect(fp, block.bounds)
            _write_array(fp, block.key_union)
            _write_array(fp, block.profile.keys)
            _write_array(fp, block.profile.frequencies)
            _write_array(fp, block.locations)
            _write_array(fp, block.feature_keys)
            _write_array(fp, block.values)
            _write_array(fp, block.neighbors)
            _write_array(fp, block.neighbor_counts)
            _write_array(fp, block.bandwidths)


def load_cache(path: str | Path) -> PrecomputedCache:
    with open(path, "rb") as fp:
        _check_header(fp, CACHE_MAGIC, CACHE_FORMAT_VERSION, "positioning cache")
        cell, spacing, missing, radius, full, floor = _read_scalars(fp, "ddddBd")
        roi_keys = _read_array(fp)
        (n_regions,) = _read_scalars(fp, "I")
        blocks = []
        for _ in range(n_regions):
            (index,) = _read_scalars(fp, "I")
            bounds = _read_rect(fp)
            blocks.append(
                RegionBlock(
                    index=index,
                    bounds=bounds,
                    key_union=_read_array(fp),
                    profile=RelevanceProfile(_read_array(fp), _read_array(fp)),
                    locations=_read_array(fp),
                    feature_keys=_read_array(fp),
                    values=_read_array(fp),
                    neighbors=_read_array(fp),
                    neighbor_counts=_read_array(fp),
                    bandwidths=_read_array(fp),
                )
            )
        return PrecomputedCache(
            regions=tuple(blocks),
            grid=GridSpec(cell, spacing),
            missing_value=missing,
            full=bool(full),
            roi_key_union=roi_keys,
            pooling_radius=radius,
            bandwidth_floor=floor,
        )
