"""Accuracy and timing benchmarks for positioning configurations.

Computes squared-error statistics, the empirical CDF of positioning
errors, per-query wall-clock timings, and the predicted-vs-measured cost
ratio of restricted configurations against the full MAP baseline.
"""

from __future__ import annotations

import csv
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import Fingerprint
from .positioning import PrecomputedCache, locate, locate_full, predicted_cost
from .subregion import modified_jaccard

TestSet = Sequence[tuple[Fingerprint, np.ndarray]]

_CONFIG_RE = re.compile(r"^k(\d+)h(\d+|all)$")

REPORT_COLUMNS = (
    "config",
    "n_queries",
    "mse_m2",
    "median_m",
    "p90_m",
    "time_mean_s",
    "time_min_s",
    "time_max_s",
    "time_std_s",
    "predicted_ratio",
    "measured_ratio",
)


@dataclass(frozen=True)
class EvalConfig:
    """One benchmark configuration: candidate-region and feature budgets.

    k None means every sub-region, h None every shared feature; both None
    is the full MAP baseline.
    """

    name: str
    k: int | None
    h: int | None

    @property
    def is_full(self) -> bool:
        return self.k is None and self.h is None


def parse_config(text: str) -> EvalConfig:
    """Parse 'full', 'k10h10', 'k3hall' style configuration names."""
    text = text.strip()
    if text == "full":
        return EvalConfig("full", None, None)
    m = _CONFIG_RE.match(text)
    if not m:
        raise ValueError(f"bad config {text!r}; expected 'full' or 'k<int>h<int|all>'")
    h = None if m.group(2) == "all" else int(m.group(2))
    return EvalConfig(text, int(m.group(1)), h)


@dataclass
class EvalReport:
    config: EvalConfig
    errors: np.ndarray
    cpa: tuple[np.ndarray, np.ndarray]
    mse: float
    median: float
    p90: float
    time_mean: float
    time_min: float
    time_max: float
    time_std: float
    predicted_ratio: float
    measured_ratio: float | None = None


def cpa_curve(errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF at the sorted error values (no binning)."""
    err = np.sort(np.asarray(errors, dtype=np.float64))
    frac = np.arange(1, len(err) + 1) / len(err)
    return err, frac


def _run(cache: PrecomputedCache, cfg: EvalConfig, fp: Fingerprint):
    if cfg.is_full:
        return locate_full(cache, fp)
    k = cache.n_sub_regions if cfg.k is None else cfg.k
    return locate(cache, fp, k=k, h=cfg.h)


def evaluate(
    cache: PrecomputedCache,
    testset: TestSet,
    configs: Sequence[EvalConfig],
    repeats: int = 1,
) -> list[EvalReport]:
    """Run every configuration over the test set.

    Position estimates come from a warm-up pass; timings from `repeats`
    further sequential passes with per-query wall clocks, so the reported
    latencies see a warm cache.
    """
    if len(testset) == 0:
        raise ValueError("empty test set")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    reports = []
    for cfg in configs:
        estimates = [_run(cache, cfg, fp) for fp, _ in testset]
        errors = np.array(
            [
                float(np.linalg.norm(est.coordinates - truth))
                for est, (_, truth) in zip(estimates, testset)
            ]
        )
        times = np.empty(repeats * len(testset))
        i = 0
        for _ in range(repeats):
            for fp, _ in testset:
                t0 = time.perf_counter()
                _run(cache, cfg, fp)
                times[i] = time.perf_counter() - t0
                i += 1
        sel_ops, full_ops = predicted_cost(cache, cfg.k, cfg.h)
        reports.append(
            EvalReport(
                config=cfg,
                errors=errors,
                cpa=cpa_curve(errors),
                mse=float(np.mean(errors**2)),
                median=float(np.quantile(errors, 0.5)),
                p90=float(np.quantile(errors, 0.9)),
                time_mean=float(times.mean()),
                time_min=float(times.min()),
                time_max=float(times.max()),
                time_std=float(times.std()),
                predicted_ratio=sel_ops / full_ops,
            )
        )
    full_means = [r.time_mean for r in reports if r.config.is_full]
    if full_means:
        for r in reports:
            r.measured_ratio = r.time_mean / full_means[0]
    return reports


def mse_vs_h(
    cache: PrecomputedCache, testset: TestSet, h_range: Sequence[int], k: int
) -> list[tuple[int, float]]:
    """Mean squared positioning error as a function of the feature budget."""
    if len(h_range) == 0:
        raise ValueError("h_range must be non-empty")
    curve = []
    for h in h_range:
        errors = [
            float(np.linalg.norm(locate(cache, fp, k=k, h=int(h)).coordinates - truth))
            for fp, truth in testset
        ]
        curve.append((int(h), float(np.mean(np.array(errors) ** 2))))
    return curve


def pairwise_similarity_distance(regions) -> tuple[np.ndarray, np.ndarray]:
    """Modified Jaccard index and centroid distance for all region pairs.

    Accepts a gridded RFM or a cache; nearby sub-regions observe similar
    feature sets, so the two series should anti-correlate.
    """
    blocks = list(getattr(regions, "sub_regions", None) or regions.regions)
    sims, dists = [], []
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            sims.append(modified_jaccard(blocks[i].key_union, blocks[j].key_union))
            dists.append(
                float(np.linalg.norm(blocks[i].bounds.center - blocks[j].bounds.center))
            )
    return np.array(sims), np.array(dists)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def write_report(path: str | Path, reports: Sequence[EvalReport]) -> None:
    """One CSV row per configuration (columns in REPORT_COLUMNS order)."""
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.config.name,
                    len(r.errors),
                    _fmt(r.mse),
                    _fmt(r.median),
                    _fmt(r.p90),
                    _fmt(r.time_mean),
                    _fmt(r.time_min),
                    _fmt(r.time_max),
                    _fmt(r.time_std),
                    _fmt(r.predicted_ratio),
                    _fmt(r.measured_ratio),
                ]
            )


def write_cpa(path: str | Path, reports: Sequence[EvalReport]) -> None:
    """Plot-ready CPA curves: config, error_m, cum_fraction."""
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["config", "error_m", "cum_fraction"])
        for r in reports:
            for err, frac in zip(*r.cpa):
                writer.writerow([r.config.name, _fmt(err), _fmt(frac)])
