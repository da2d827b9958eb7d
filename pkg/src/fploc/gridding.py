"""Radio-map construction: survey ingestion, gridding and segmentation.

Survey records are collected at arbitrary positions; the map used online
is a regular lattice of reference points obtained by nearest-neighbor
interpolation, partitioned into equal-size square sub-regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np
import shapely
from scipy.spatial.distance import cdist

from . import logio
from .model import GriddedRFM, Rect, ReferenceRecord, SubRegion, key_union

# Relative slack for the cell_size / grid_spacing divisibility check.
_DIV_TOL = 1e-9


@dataclass(frozen=True)
class RawRFM:
    """Survey records at arbitrary positions inside a rectangular extent."""

    records: tuple[ReferenceRecord, ...]
    roi_bounds: Rect

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("no reference data")
        positions = np.array([r.position for r in self.records])
        if not np.all(self.roi_bounds.contains(positions)):
            raise ValueError("all survey positions must lie inside roi_bounds")

    @property
    def positions(self) -> np.ndarray:
        return np.array([r.position for r in self.records])


@dataclass(frozen=True)
class GridSpec:
    """Sub-region edge length and reference-point pitch, both in meters.

    cell_size must be an integer multiple of grid_spacing so every
    sub-region holds the same number of lattice points.
    """

    cell_size: float
    grid_spacing: float

    def __post_init__(self):
        if self.cell_size <= 0 or self.grid_spacing <= 0:
            raise ValueError("cell_size and grid_spacing must be positive")
        ratio = self.cell_size / self.grid_spacing
        if abs(ratio - round(ratio)) > _DIV_TOL * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError("cell_size must be an integer multiple of grid_spacing")

    @property
    def points_per_edge(self) -> int:
        return round(self.cell_size / self.grid_spacing)


def ingest(source: str | Path | IO[str]) -> RawRFM:
    """Parse a fingerprint log into a RawRFM; bounds are the position bbox."""
    records = logio.read_records(source)
    if not records:
        raise ValueError("no reference data")
    positions = np.array([r.position for r in records])
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    # Degenerate extents (single point / collinear survey) get a small pad.
    pad = np.where(hi - lo <= 0, 0.5, 0.0)
    bounds = Rect(lo[0] - pad[0], lo[1] - pad[1], hi[0] + pad[0], hi[1] + pad[1])
    return RawRFM(tuple(records), bounds)


def _nearest_record_indices(
    lattice: np.ndarray, raw_positions: np.ndarray, chunk: int = 2048
) -> np.ndarray:
    """Index of the nearest raw record per lattice point.

    Brute-force squared-distance argmin; ties resolve to the lowest record
    index, which keeps gridding deterministic.
    """
    out = np.empty(len(lattice), dtype=np.int64)
    for start in range(0, len(lattice), chunk):
        block = lattice[start : start + chunk]
        d2 = cdist(block, raw_positions, "sqeuclidean")
        out[start : start + chunk] = np.argmin(d2, axis=1)
    return out


def _cell_lattice(spec: GridSpec, origin: np.ndarray, cx: int, cy: int) -> np.ndarray:
    """Lattice points of cell (cx, cy), at centers of the spacing grid."""
    m = spec.points_per_edge
    s = spec.grid_spacing
    x0 = origin[0] + cx * spec.cell_size
    y0 = origin[1] + cy * spec.cell_size
    offs = (np.arange(m) + 0.5) * s
    xx, yy = np.meshgrid(x0 + offs, y0 + offs)
    return np.column_stack([xx.ravel(), yy.ravel()])


def grid_interpolate(
    raw: RawRFM,
    spec: GridSpec,
    mask_polygon: Sequence[tuple[float, float]] | None = None,
) -> GriddedRFM:
    """Densify a raw survey to a regular lattice and segment it into cells.

    Every lattice point carries the full fingerprint of its nearest survey
    record. Cells are indexed row-major over the grid; with a polygon mask,
    cells none of whose lattice points touch the polygon are dropped (the
    remaining cells keep their complete lattice, so the per-cell point
    count stays constant).
    """
    b = raw.roi_bounds
    origin = np.array([b.xmin, b.ymin])
    ncx = max(1, math.ceil((b.xmax - b.xmin) / spec.cell_size - _DIV_TOL))
    ncy = max(1, math.ceil((b.ymax - b.ymin) / spec.cell_size - _DIV_TOL))

    polygon = None
    if mask_polygon is not None:
        polygon = shapely.Polygon(mask_polygon)
        if not polygon.is_valid:
            raise ValueError("mask polygon is not a valid simple polygon")

    raw_positions = raw.positions
    sub_regions: list[SubRegion] = []
    for cy in range(ncy):
        for cx in range(ncx):
            lattice = _cell_lattice(spec, origin, cx, cy)
            if polygon is not None:
                inside = shapely.intersects_xy(polygon, lattice[:, 0], lattice[:, 1])
                if not inside.any():
                    continue
            nn = _nearest_record_indices(lattice, raw_positions)
            records = [
                ReferenceRecord(raw.records[j].fingerprint, xy)
                for j, xy in zip(nn, lattice)
            ]
            bounds = Rect(
                origin[0] + cx * spec.cell_size,
                origin[1] + cy * spec.cell_size,
                origin[0] + (cx + 1) * spec.cell_size,
                origin[1] + (cy + 1) * spec.cell_size,
            )
            sub_regions.append(SubRegion.build(len(sub_regions), bounds, records))

    if not sub_regions:
        raise ValueError("mask polygon excludes every grid cell")

    roi_keys = key_union([r for s in sub_regions for r in s.reference_points])
    return GriddedRFM(
        tuple(sub_regions), spec.cell_size, spec.grid_spacing, roi_keys
    )


def read_polygon(source: str | Path | IO[str]) -> list[tuple[float, float]]:
    """Read a polygon mask: one 'x y' (or 'x,y') vertex per line."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    vertices = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip().replace(",", " ")
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two coordinates")
        vertices.append((float(parts[0]), float(parts[1])))
    if len(vertices) < 3:
        raise ValueError("polygon mask needs at least three vertices")
    return vertices
