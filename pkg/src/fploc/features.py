"""Per-sub-region relevant-feature identification.

Positions are regressed onto dense missing-filled feature vectors with an
L1 penalty; repeating the fit on bootstrap subsamples and ranking features
by how often their coefficient row survives thresholding yields a stable
relevance ranking per sub-region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import KEY_DTYPE, MISSING_VALUE_DBM, SubRegion, feature_vector

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the fallback tests
    HAVE_NUMBA = False

CD_TOL = 1e-8
CD_MAX_SWEEPS = 100_000


@dataclass(frozen=True)
class RegressionProblem:
    """Standardized design: X rows are feature vectors, Y rows positions.

    Columns of X are zero-mean and unit-scale (zero-variance columns are
    kept, standardized to all zeros); Y is centered per coordinate, so no
    intercept is fitted.
    """

    X: np.ndarray
    Y: np.ndarray
    column_means: np.ndarray
    column_stds: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.Y.ndim != 2 or self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y must be matrices with equal row counts")
        for arr in (self.X, self.Y, self.column_means, self.column_stds):
            if not np.all(np.isfinite(arr)):
                raise ValueError("regression problem must be finite")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CoefficientMatrix:
    """L x D regression coefficients, one column per position coordinate."""

    P: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.P)):
            raise ValueError("coefficients must be finite")


@dataclass(frozen=True)
class RelevanceProfile:
    """Feature keys ranked by selection frequency (descending, ties by key)."""

    keys: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        keys = np.asarray(self.keys, dtype=KEY_DTYPE)
        freqs = np.asarray(self.frequencies, dtype=np.float64)
        if keys.shape != freqs.shape or keys.ndim != 1:
            raise ValueError("keys and frequencies must be equal-length vectors")
        if len(np.unique(keys)) != len(keys):
            raise ValueError("profile keys must be unique")
        if len(freqs) and (freqs.min() < 0 or freqs.max() > 1):
            raise ValueError("frequencies must lie in [0, 1]")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "frequencies", freqs)

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class RandomizedLassoConfig:
    sampling_ratio: float = 0.75
    randomizations: int = 200
    relevance_threshold: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.sampling_ratio < 1.0:
            raise ValueError("sampling_ratio must lie in (0, 1)")
        if self.randomizations < 1:
            raise ValueError("randomizations must be >= 1")
        if self.relevance_threshold <= 0:
            raise ValueError("relevance_threshold must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def raw_design(region: SubRegion, missing_value: float) -> tuple[np.ndarray, np.ndarray]:
    """Missing-filled feature matrix and position matrix of a sub-region."""
    X = np.array(
        [feature_vector(r, region.key_union, missing_value) for r in region.reference_points]
    )
    Y = region.positions
    return X, Y


def standardize_design(X_raw: np.ndarray, Y_raw: np.ndarray) -> RegressionProblem:
    means = X_raw.mean(axis=0)
    stds = X_raw.std(axis=0)
    with np.errstate(invalid="ignore"):
        X = np.where(stds > 0, (X_raw - means) / np.where(stds > 0, stds, 1.0), 0.0)
    Y = Y_raw - Y_raw.mean(axis=0)
    return RegressionProblem(X, Y, means, stds)


def build_problem(region: SubRegion, missing_value: float = MISSING_VALUE_DBM) -> RegressionProblem:
    if len(region.reference_points) < 2:
        raise ValueError("sub-region needs at least 2 reference points to regress")
    return standardize_design(*raw_design(region, missing_value))


def lasso_objective(problem: RegressionProblem, P: np.ndarray, lam: float) -> float:
    """(1/M)·||X P - Y||_F^2 + lam·sum(|P|); entrywise L1 penalty."""
    resid = problem.X @ P - problem.Y
    return float(np.sum(resid * resid) / problem.n_rows + lam * np.sum(np.abs(P)))


def lambda_max(problem: RegressionProblem) -> float:
    """Smallest penalty at which the all-zero coefficient matrix is optimal."""
    if problem.n_features == 0:
        return 0.0
    return float(2.0 / problem.n_rows * np.max(np.abs(problem.X.T @ problem.Y)))


def _cd_kernel_numpy(
    XT: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float,
    max_sweeps: int,
    p: np.ndarray,
    trace: np.ndarray,
) -> int:
    """Cyclic coordinate descent with soft-thresholding for one output.

    Minimizes (1/M)·||X p - y||^2 + lam·||p||_1, stopping when the largest
    coefficient change over a sweep falls below tol. Zero-variance columns
    never move. Writes the per-sweep objective into `trace` when it has
    room; returns the number of sweeps run.
    """
    M = XT.shape[1]
    col_sq = np.einsum("ij,ij->i", XT, XT)
    active = np.flatnonzero(col_sq > 0)
    r = y - XT.T @ p
    thresh = 0.5 * lam * M
    # Slack absorbs summation-order rounding so "penalty at or above
    # lambda_max" yields exactly zero coefficients.
    cut = thresh * (1.0 + 1e-12)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        max_delta = 0.0
        for j in active:
            xj = XT[j]
            pj = p[j]
            if pj != 0.0:
                r += xj * pj
            rho = float(xj @ r)
            if abs(rho) <= cut:
                pj_new = 0.0
            else:
                pj_new = (rho - math.copysign(thresh, rho)) / col_sq[j]
                r -= xj * pj_new
            p[j] = pj_new
            delta = abs(pj_new - pj)
            if delta > max_delta:
                max_delta = delta
        if sweep < len(trace):
            trace[sweep] = float(r @ r) / M + lam * float(np.abs(p).sum())
        if max_delta < tol:
            break
    return sweeps


if HAVE_NUMBA:

    @njit(cache=True)
    def _cd_kernel_jit(XT, y, lam, tol, max_sweeps, p, trace):  # pragma: no cover
        L, M = XT.shape
        col_sq = np.empty(L)
        for j in range(L):
            s = 0.0
            for i in range(M):
                s += XT[j, i] * XT[j, i]
            col_sq[j] = s
        r = y.copy()
        for j in range(L):
            pj = p[j]
            if pj != 0.0:
                for i in range(M):
                    r[i] -= XT[j, i] * pj
        thresh = 0.5 * lam * M
        cut = thresh * (1.0 + 1e-12)
        sweeps = 0
        for sweep in range(max_sweeps):
            sweeps = sweep + 1
            max_delta = 0.0
            for j in range(L):
                if col_sq[j] == 0.0:
                    continue
                pj = p[j]
                if pj != 0.0:
                    for i in range(M):
                        r[i] += XT[j, i] * pj
                rho = 0.0
                for i in range(M):
                    rho += XT[j, i] * r[i]
                if abs(rho) <= cut:
                    pj_new = 0.0
                elif rho > 0.0:
                    pj_new = (rho - thresh) / col_sq[j]
                else:
                    pj_new = (rho + thresh) / col_sq[j]
                if pj_new != 0.0:
                    for i in range(M):
                        r[i] -= XT[j, i] * pj_new
                p[j] = pj_new
                delta = abs(pj_new - pj)
                if delta > max_delta:
                    max_delta = delta
            if sweep < len(trace):
                obj = 0.0
                for i in range(M):
                    obj += r[i] * r[i]
                obj /= M
                for j in range(L):
                    obj += lam * abs(p[j])
                trace[sweep] = obj
            if max_delta < tol:
                break
        return sweeps

    _cd_kernel = _cd_kernel_jit
else:
    _cd_kernel = _cd_kernel_numpy


def _cd_solve(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float,
    max_sweeps: int,
    p0: np.ndarray | None = None,
    trace: list | None = None,
) -> np.ndarray:
    XT = np.ascontiguousarray(X.T)
    p = np.zeros(X.shape[1]) if p0 is None else np.array(p0, dtype=np.float64)
    trace_buf = np.empty(max_sweeps if trace is not None else 0)
    sweeps = _cd_kernel(XT, np.ascontiguousarray(y), lam, tol, max_sweeps, p, trace_buf)
    if trace is not None:
        trace.extend(trace_buf[:sweeps].tolist())
    return p


def lasso_fit(
    problem: RegressionProblem,
    lam: float,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
    warm_start: np.ndarray | None = None,
    objective_trace: list | None = None,
) -> CoefficientMatrix:
    """L1-regularized least squares, solved per output dimension.

    The entrywise L1 penalty separates over columns of P, so each position
    coordinate is an independent coordinate-descent problem.

    With `objective_trace` a list, one per-sweep objective list is appended
    per output dimension.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    D = problem.Y.shape[1]
    cols = []
    for d in range(D):
        trace_d = [] if objective_trace is not None else None
        p0 = warm_start[:, d] if warm_start is not None else None
        cols.append(
            _cd_solve(problem.X, problem.Y[:, d], lam, tol, max_sweeps, p0, trace_d)
        )
        if objective_trace is not None:
            objective_trace.append(trace_d)
    return CoefficientMatrix(np.column_stack(cols))


def default_lambda_grid(problem: RegressionProblem, n: int = 12, span: float = 1e-3) -> np.ndarray:
    """Descending geometric grid from lambda_max down to lambda_max*span."""
    lmax = lambda_max(problem)
    if lmax <= 0:
        return np.array([1.0])
    return lmax * np.geomspace(1.0, span, n)


def select_lambda_cv(problem: RegressionProblem, grid: np.ndarray, folds: int) -> float:
    """Penalty from `grid` minimizing mean held-out squared position error.

    K-fold over contiguous row blocks; ties resolve toward the larger
    penalty (the sparser model).
    """
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) == 0:
        raise ValueError("lambda grid must be non-empty")
    if np.any(grid <= 0):
        raise ValueError("lambda grid entries must be positive")
    if np.any(np.diff(grid) > 0):
        raise ValueError("lambda grid must be descending")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > problem.n_rows:
        raise ValueError("more folds than rows")

    fold_indices = np.array_split(np.arange(problem.n_rows), folds)
    errors = np.zeros(len(grid))
    for test_idx in fold_indices:
        mask = np.ones(problem.n_rows, dtype=bool)
        mask[test_idx] = False
        train = RegressionProblem(
            problem.X[mask], problem.Y[mask], problem.column_means, problem.column_stds
        )
        warm = None
        for g, lam in enumerate(grid):
            fit = lasso_fit(train, lam, warm_start=warm)
            warm = fit.P
            resid = problem.X[test_idx] @ fit.P - problem.Y[test_idx]
            errors[g] += float(np.mean(np.sum(resid * resid, axis=1)))
    # Grid is descending, so the first minimum is the largest tying lambda.
    return float(grid[int(np.argmin(errors))])


def randomized_lasso(
    region: SubRegion,
    cfg: RandomizedLassoConfig,
    lam: float,
    missing_value: float = MISSING_VALUE_DBM,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
) -> RelevanceProfile:
    """Selection frequencies over bootstrap-subsampled L1 fits.

    Each of the T rounds draws ceil(ratio*M) rows with replacement,
    restandardizes, fits at the given penalty, and marks features whose
    coefficient row peaks above the relevance threshold. Features never
    selected are omitted from the profile.
    """
    X_raw, Y_raw = raw_design(region, missing_value)
    M = X_raw.shape[0]
    n_draw = math.ceil(cfg.sampling_ratio * M)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.randomizations)
    counts = np.zeros(X_raw.shape[1], dtype=np.int64)
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, M, size=n_draw)
        prob = standardize_design(X_raw[idx], Y_raw[idx])
        fit = lasso_fit(prob, lam, tol=tol, max_sweeps=max_sweeps)
        counts += np.max(np.abs(fit.P), axis=1) > cfg.relevance_threshold
    freqs = counts / cfg.randomizations
    keep = freqs > 0
    keys = region.key_union[keep]
    freqs = freqs[keep]
    order = np.lexsort((keys, -freqs))
    return RelevanceProfile(keys[order], freqs[order])


def take_relevant(profile: RelevanceProfile, h: int, available: np.ndarray) -> np.ndarray:
    """First h ranked profile keys that are members of `available` (sorted).

    Returns fewer than h keys when the profile runs out; possibly none.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if len(profile) == 0 or len(available) == 0:
        return np.empty(0, dtype=KEY_DTYPE)
    pos = np.searchsorted(available, profile.keys)
    pos_clipped = np.minimum(pos, len(available) - 1)
    hit = available[pos_clipped] == profile.keys
    return profile.keys[hit][:h]
