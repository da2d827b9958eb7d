"""Synthetic WLAN scene generator.

Log-distance path loss with lognormal shadowing and a visibility cutoff:
access points too far away simply vanish from the fingerprint, which gives
the spatial feature-availability variation the positioning pipeline
exploits. Stands in for a real survey; no multipath, no walls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
from scipy.spatial.distance import cdist

from .gridding import RawRFM
from .model import KEY_DTYPE, Fingerprint, Rect, ReferenceRecord, feature_key

# L-shaped region, 136 m^2: 34 cells at the default 2 m grid.
DEFAULT_ROI = ((0.0, 0.0), (16.0, 0.0), (16.0, 6.0), (10.0, 6.0), (10.0, 10.0), (0.0, 10.0))

_AP_STREAM, _SURVEY_STREAM, _TEST_STREAM = 0, 1, 2


@dataclass(frozen=True)
class SceneConfig:
    roi_polygon: tuple[tuple[float, float], ...] = DEFAULT_ROI
    ap_count: int = 100
    tx_power: float = -45.0
    path_loss_exponent: float = 5.0
    reference_distance: float = 1.0
    shadowing_sigma: float = 4.0
    visibility_cutoff: float = -80.0
    seed: int = 0

    def __post_init__(self):
        if self.ap_count < 1:
            raise ValueError("need at least one access point")
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be positive")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing_sigma must be non-negative")
        if self.visibility_cutoff >= self.tx_power:
            raise ValueError("visibility_cutoff must lie below tx_power")
        if len(self.roi_polygon) < 3:
            raise ValueError("roi_polygon needs at least three vertices")

    @property
    def polygon(self) -> shapely.Polygon:
        return shapely.Polygon(self.roi_polygon)


def _rng(cfg: SceneConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, stream]))


def _sample_in_polygon(
    polygon: shapely.Polygon, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform points inside the polygon by rejection from its bbox."""
    xmin, ymin, xmax, ymax = polygon.bounds
    points = np.empty((count, 2))
    have = 0
    while have < count:
        need = count - have
        draw = rng.uniform((xmin, ymin), (xmax, ymax), size=(max(2 * need, 16), 2))
        inside = shapely.intersects_xy(polygon, draw[:, 0], draw[:, 1])
        accepted = draw[inside][:need]
        points[have : have + len(accepted)] = accepted
        have += len(accepted)
    return points


@dataclass(frozen=True)
class Scene:
    """A scene configuration realized into AP placements and keys."""

    config: SceneConfig
    ap_positions: np.ndarray
    ap_keys: np.ndarray

    @classmethod
    def from_config(cls, cfg: SceneConfig) -> "Scene":
        rng = _rng(cfg, _AP_STREAM)
        positions = _sample_in_polygon(cfg.polygon, cfg.ap_count, rng)
        keys = np.array(
            [feature_key(f"ap-{i:04d}") for i in range(cfg.ap_count)], dtype=KEY_DTYPE
        )
        if len(np.unique(keys)) != len(keys):
            raise RuntimeError("feature key collision among synthetic APs")
        return cls(cfg, positions, keys)


def sample_rss(
    ap_position: np.ndarray,
    user_position: np.ndarray,
    cfg: SceneConfig,
    rng: np.random.Generator,
) -> float | None:
    """One RSS observation, or None when it falls below the cutoff."""
    d = float(np.linalg.norm(np.asarray(ap_position) - np.asarray(user_position)))
    d = max(d, cfg.reference_distance)
    rss = cfg.tx_power - 10.0 * cfg.path_loss_exponent * math.log10(
        d / cfg.reference_distance
    )
    if cfg.shadowing_sigma > 0:
        rss += rng.normal(0.0, cfg.shadowing_sigma)
    return rss if rss >= cfg.visibility_cutoff else None


def _fingerprints(
    positions: np.ndarray, scene: Scene, rng: np.random.Generator
) -> list[Fingerprint]:
    cfg = scene.config
    d = np.maximum(cdist(positions, scene.ap_positions), cfg.reference_distance)
    rss = cfg.tx_power - 10.0 * cfg.path_loss_exponent * np.log10(
        d / cfg.reference_distance
    )
    if cfg.shadowing_sigma > 0:
        rss = rss + rng.normal(0.0, cfg.shadowing_sigma, size=rss.shape)
    out = []
    for row in rss:
        visible = row >= cfg.visibility_cutoff
        keys = scene.ap_keys[visible]
        order = np.argsort(keys)
        out.append(Fingerprint(keys[order], row[visible][order]))
    return out


def _serpentine(polygon: shapely.Polygon, spacing: float) -> np.ndarray:
    """Points of a boustrophedon walk over the polygon at the given pitch."""
    xmin, ymin, xmax, ymax = polygon.bounds
    ys = np.arange(ymin + spacing / 2, ymax, spacing)
    rows = []
    for i, y in enumerate(ys):
        xs = np.arange(xmin + spacing / 2, xmax, spacing)
        if i % 2:
            xs = xs[::-1]
        rows.append(np.column_stack([xs, np.full(len(xs), y)]))
    points = np.concatenate(rows)
    inside = shapely.intersects_xy(polygon, points[:, 0], points[:, 1])
    return points[inside]


def generate_survey(cfg: SceneConfig, walk_spacing: float = 0.26) -> RawRFM:
    """Reference records along a serpentine walk through the RoI."""
    if walk_spacing <= 0:
        raise ValueError("walk_spacing must be positive")
    scene = Scene.from_config(cfg)
    points = _serpentine(cfg.polygon, walk_spacing)
    if len(points) == 0:
        raise ValueError("walk_spacing too large for the RoI polygon")
    fps = _fingerprints(points, scene, _rng(cfg, _SURVEY_STREAM))
    records = tuple(ReferenceRecord(fp, xy) for fp, xy in zip(fps, points))
    xmin, ymin, xmax, ymax = cfg.polygon.bounds
    return RawRFM(records, Rect(xmin, ymin, xmax, ymax))


def generate_testset(
    cfg: SceneConfig, count: int = 500
) -> list[tuple[Fingerprint, np.ndarray]]:
    """(fingerprint, true position) pairs drawn uniformly over the RoI."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return []
    scene = Scene.from_config(cfg)
    rng = _rng(cfg, _TEST_STREAM)
    points = _sample_in_polygon(cfg.polygon, count, rng)
    fps = _fingerprints(points, scene, rng)
    return [(fp, xy) for fp, xy in zip(fps, points)]
