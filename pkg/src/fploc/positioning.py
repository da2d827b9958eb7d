"""MAP position estimation over precomputed per-sub-region data.

Offline, each sub-region is reduced to everything the online stage needs:
its key union (for candidate-region scoring), its relevance profile, its
candidate locations, and per-(location, feature) Gaussian-kernel density
tables. Online, a query scores candidate locations by the summed log
densities of its feature values and returns the arg max.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import (
    BANDWIDTH_FLOOR,
    DensityModel,
    batch_logpdf,
    batch_scott_bandwidths,
)
from .features import (
    RandomizedLassoConfig,
    RelevanceProfile,
    build_problem,
    default_lambda_grid,
    randomized_lasso,
    raw_design,
    select_lambda_cv,
    take_relevant,
)
from .gridding import GridSpec
from .model import KEY_DTYPE, MISSING_VALUE_DBM, Fingerprint, GriddedRFM, Rect
from .subregion import score_subregions, top_k


@dataclass(frozen=True)
class KdeConfig:
    """Density-table construction parameters.

    pooling_radius None means half the sub-region edge: wide enough that
    every location pools several lattice points despite nearest-neighbor
    gridding, while staying local to the candidate location.
    """

    pooling_radius: float | None = None
    bandwidth_floor: float = BANDWIDTH_FLOOR

    def __post_init__(self):
        if self.pooling_radius is not None and self.pooling_radius <= 0:
            raise ValueError("pooling_radius must be positive")
        if self.bandwidth_floor <= 0:
            raise ValueError("bandwidth_floor must be positive")


@dataclass(frozen=True)
class RegionBlock:
    """Online-stage data for one sub-region.

    `values` holds the missing-filled feature value per (location, covered
    key); `neighbors` lists, per location, the indices of the lattice
    points pooled into its density models (padded, see `neighbor_counts`).
    """

    index: int
    bounds: Rect
    key_union: np.ndarray
    profile: RelevanceProfile
    locations: np.ndarray
    feature_keys: np.ndarray
    values: np.ndarray
    neighbors: np.ndarray
    neighbor_counts: np.ndarray
    bandwidths: np.ndarray
    valid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(np.setdiff1d(self.profile.keys, self.key_union)):
            raise ValueError("profile keys must be a subset of the key union")
        if len(np.setdiff1d(self.feature_keys, self.key_union)):
            raise ValueError("covered keys must be a subset of the key union")
        if not np.all(self.bounds.contains(self.locations)):
            raise ValueError("candidate locations must lie inside the bounds")
        pad = np.arange(self.neighbors.shape[1])[None, :]
        object.__setattr__(
            self, "valid", (pad < self.neighbor_counts[:, None]).astype(np.float64)
        )

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    def density_model(self, location_index: int, key: int) -> DensityModel:
        """The (location, key) density model materialized from the tables."""
        j = int(np.searchsorted(self.feature_keys, np.uint64(key)))
        if j >= len(self.feature_keys) or self.feature_keys[j] != key:
            raise KeyError(f"no density table for feature key {key}")
        count = int(self.neighbor_counts[location_index])
        centers = self.values[self.neighbors[location_index, :count], j]
        return DensityModel(centers, float(self.bandwidths[location_index, j]))


@dataclass(frozen=True)
class PrecomputedCache:
    """Everything the online positioning stage touches."""

    regions: tuple[RegionBlock, ...]
    grid: GridSpec
    missing_value: float
    full: bool
    roi_key_union: np.ndarray
    pooling_radius: float
    bandwidth_floor: float

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ValueError("cache must contain at least one sub-region")
        counts = {b.n_locations for b in self.regions}
        if len(counts) != 1:
            raise ValueError("all sub-regions must hold the same number of locations")

    @property
    def n_sub_regions(self) -> int:
        return len(self.regions)

    @property
    def points_per_region(self) -> int:
        return self.regions[0].n_locations


@dataclass(frozen=True)
class PositionEstimate:
    coordinates: np.ndarray
    log_posterior: float
    subregion_index: int
    used_feature_keys: np.ndarray
    candidates_scored: int
    region_feature_counts: tuple[tuple[int, int], ...]


def _pool_neighbors(locations: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-location indices of lattice points within `radius` (incl. self).

    Returns a padded (n, max_count) int array and the per-row counts; the
    radius test carries a small relative slack so lattice-pitch multiples
    land inside despite float rounding.
    """
    diff = locations[:, None, :] - locations[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    within = d2 <= radius * radius * (1.0 + 1e-9) + 1e-12
    counts = within.sum(axis=1)
    pad_width = int(counts.max())
    neighbors = np.zeros((len(locations), pad_width), dtype=np.int32)
    for i in range(len(locations)):
        idx = np.flatnonzero(within[i])
        neighbors[i, : len(idx)] = idx
    return neighbors, counts.astype(np.int32)


def precompute(
    rfm: GriddedRFM,
    lasso_cfg: RandomizedLassoConfig = RandomizedLassoConfig(),
    kde_cfg: KdeConfig = KdeConfig(),
    missing_value: float = MISSING_VALUE_DBM,
    full_cache: bool = False,
    cv_folds: int = 5,
    lambda_grid: np.ndarray | None = None,
) -> PrecomputedCache:
    """Build the online cache: key sets, relevance profiles, density tables.

    With `full_cache`, density tables cover every key of each sub-region's
    union (required for positioning without feature selection); otherwise
    only the profile keys are covered, which is the storage-saving mode.
    """
    radius = kde_cfg.pooling_radius
    if radius is None:
        radius = rfm.cell_size / 2.0

    blocks = []
    for region in rfm.sub_regions:
        problem = build_problem(region, missing_value)
        if lambda_grid is not None:
            grid = np.asarray(lambda_grid, dtype=np.float64)
        else:
            grid = default_lambda_grid(problem)
        folds = min(cv_folds, problem.n_rows)
        lam = select_lambda_cv(problem, grid, folds) if len(grid) > 1 else float(grid[0])
        profile = randomized_lasso(region, lasso_cfg, lam, missing_value)

        covered = region.key_union if full_cache else np.sort(profile.keys)
        X_raw, _ = raw_design(region, missing_value)
        cols = np.searchsorted(region.key_union, covered)
        values = np.ascontiguousarray(X_raw[:, cols])

        locations = region.positions
        neighbors, counts = _pool_neighbors(locations, radius)
        bandwidths = np.empty((len(locations), len(covered)))
        for i in range(len(locations)):
            pooled = values[neighbors[i, : counts[i]]]
            bandwidths[i] = batch_scott_bandwidths(pooled, kde_cfg.bandwidth_floor)

        blocks.append(
            RegionBlock(
                index=region.index,
                bounds=region.bounds,
                key_union=region.key_union,
                profile=profile,
                locations=locations,
                feature_keys=np.asarray(covered, dtype=KEY_DTYPE),
                values=values,
                neighbors=neighbors,
                neighbor_counts=counts,
                bandwidths=bandwidths,
            )
        )

    return PrecomputedCache(
        regions=tuple(blocks),
        grid=GridSpec(rfm.cell_size, rfm.grid_spacing),
        missing_value=missing_value,
        full=full_cache,
        roi_key_union=rfm.roi_key_union,
        pooling_radius=radius,
        bandwidth_floor=kde_cfg.bandwidth_floor,
    )


def _region_scores(
    block: RegionBlock,
    user: Fingerprint,
    h: int | None,
    missing_value: float,
    bandwidth_floor: float,
) -> tuple[np.ndarray, np.ndarray] | None:
    """(used keys, per-location log posterior) or None if no key is usable.

    With a feature budget h, the budget is spent on profile-ranked keys
    present in both the fingerprint and the region's map. Without one
    (h=None), every observed user feature is scored; a feature the region
    never observed is evaluated against the degenerate all-missing density
    (every pooled value is the fill), keeping per-region log posteriors
    comparable across regions with different feature availability.
    """
    if h is None:
        keys = user.keys
    else:
        available = np.intersect1d(user.keys, block.key_union, assume_unique=True)
        keys = take_relevant(block.profile, h, available)
    if len(keys) == 0:
        return None
    scores = np.zeros(block.n_locations)
    for key in keys:
        x = float(user.values[np.searchsorted(user.keys, key)])
        j = int(np.searchsorted(block.feature_keys, key))
        if j < len(block.feature_keys) and block.feature_keys[j] == key:
            centers = block.values[block.neighbors, j]
            scores += batch_logpdf(
                centers, block.valid, block.neighbor_counts, block.bandwidths[:, j], x
            )
        else:
            scores += (
                -0.5 * ((x - missing_value) / bandwidth_floor) ** 2
                - np.log(bandwidth_floor)
                - 0.5 * np.log(2.0 * np.pi)
            )
    return keys, scores


def _argmax_estimate(
    cache: PrecomputedCache,
    scored: Sequence[tuple[int, np.ndarray, np.ndarray]],
) -> PositionEstimate:
    """Reduce per-region score vectors to the MAP estimate.

    Ties resolve to the lower sub-region index, then to lexicographically
    smaller coordinates, independent of evaluation order.
    """
    best = None
    counts = []
    total = 0
    for index, keys, scores in scored:
        block = cache.regions[index]
        counts.append((index, len(keys)))
        total += block.n_locations
        m = float(scores.max())
        if best is not None and (m < best[0] or (m == best[0] and index > best[1])):
            continue
        tied = block.locations[scores == m]
        order = np.lexsort((tied[:, 1], tied[:, 0]))
        coords = tied[order[0]]
        best = (m, index, coords, keys)
    if best is None:
        raise ValueError("no usable features")
    return PositionEstimate(
        coordinates=best[2],
        log_posterior=best[0],
        subregion_index=best[1],
        used_feature_keys=best[3],
        candidates_scored=total,
        region_feature_counts=tuple(counts),
    )


def _locate(
    cache: PrecomputedCache,
    user: Fingerprint,
    candidate_indices: Sequence[int],
    h: int | None,
) -> PositionEstimate:
    if h is None and not cache.full:
        raise ValueError("positioning on all features requires a full cache")
    scored = []
    for index in candidate_indices:
        result = _region_scores(
            cache.regions[index], user, h, cache.missing_value, cache.bandwidth_floor
        )
        if result is not None:
            scored.append((index, result[0], result[1]))
    return _argmax_estimate(cache, scored)


def locate(
    cache: PrecomputedCache, user: Fingerprint, k: int = 10, h: int | None = 10
) -> PositionEstimate:
    """MAP estimate restricted to the k best candidate sub-regions.

    Within each candidate region, up to h profile-ranked features present
    in both the fingerprint and the region's map are scored (h=None scores
    every shared feature, which needs a full cache). The uniform location
    prior contributes a constant and is dropped.
    """
    if h is not None and h < 1:
        raise ValueError("h must be >= 1")
    candidates = top_k(score_subregions(cache.regions, user), k)
    return _locate(cache, user, candidates.indices, h)


def locate_full(cache: PrecomputedCache, user: Fingerprint) -> PositionEstimate:
    """Baseline MAP over all sub-regions and all shared features."""
    if len(user.keys) == 0:
        raise ValueError("empty fingerprint")
    return _locate(cache, user, range(cache.n_sub_regions), None)


def predicted_cost(
    cache: PrecomputedCache, k: int | None, h: int | None
) -> tuple[int, int]:
    """Operation counts (selected, full) of the complexity model.

    Both are alpha * regions * (features + 1); the selected variant swaps
    in the candidate-region count k and the per-region feature budget h.
    None means the full value (k=N, h=all observable features).
    """
    alpha = cache.points_per_region
    n = cache.n_sub_regions
    total_keys = len(cache.roi_key_union)
    k_eff = n if k is None else k
    h_eff = total_keys if h is None else h
    selected = alpha * k_eff * (h_eff + 1)
    full = alpha * n * (total_keys + 1)
    return selected, full
