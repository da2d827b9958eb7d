"""Sub-region candidate selection via a modified Jaccard index.

A user fingerprint is matched against each sub-region's key union; the
index rewards regions whose observable features cover the user's observed
features, and the k best-scoring regions become the candidate set for
position estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Fingerprint


@dataclass(frozen=True)
class SubRegionScore:
    index: int
    score: float


@dataclass(frozen=True)
class CandidateSet:
    """Top-k sub-region indices, descending score, ties by ascending index."""

    indices: tuple[int, ...]


def modified_jaccard(region_keys: np.ndarray, user_keys: np.ndarray) -> float:
    """Similarity in [0, 1] between a region's key set and a user key set.

    Mean of the plain Jaccard index and the coverage fraction
    |A∩B| / |B|, which favors regions containing all or most of the
    user-observed features.
    """
    if len(user_keys) == 0:
        raise ValueError("empty fingerprint")
    inter = len(np.intersect1d(region_keys, user_keys, assume_unique=True))
    union = len(region_keys) + len(user_keys) - inter
    return 0.5 * (inter / union + inter / len(user_keys))


def score_subregions(key_unions, user: Fingerprint) -> list[SubRegionScore]:
    """Modified Jaccard score of every sub-region against the user keys.

    `key_unions` is any iterable of sorted key arrays, or of objects
    carrying a `key_union` attribute (sub-regions, cache blocks, maps).
    """
    arrays = [getattr(u, "key_union", u) for u in key_unions]
    return [
        SubRegionScore(i, modified_jaccard(keys, user.keys))
        for i, keys in enumerate(arrays)
    ]


def top_k(scores: list[SubRegionScore], k: int) -> CandidateSet:
    n = len(scores)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    values = np.array([s.score for s in scores])
    indices = np.array([s.index for s in scores])
    order = np.lexsort((indices, -values))
    return CandidateSet(tuple(int(indices[i]) for i in order[:k]))


def select_subregions(rfm, user: Fingerprint, k: int) -> CandidateSet:
    """Indices of the k sub-regions most similar to the user fingerprint.

    Works on any container exposing `sub_regions` (a gridded RFM) or
    `regions` (a precomputed cache) whose elements carry `key_union`.
    """
    regions = getattr(rfm, "sub_regions", None)
    if regions is None:
        regions = rfm.regions
    return top_k(score_subregions(regions, user), k)
