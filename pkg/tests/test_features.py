import numpy as np
import pytest

from fploc.features import (
    HAVE_NUMBA,
    RandomizedLassoConfig,
    RegressionProblem,
    RelevanceProfile,
    _cd_kernel_numpy,
    build_problem,
    default_lambda_grid,
    lambda_max,
    lasso_fit,
    lasso_objective,
    randomized_lasso,
    select_lambda_cv,
    standardize_design,
    take_relevant,
)
from fploc.model import KEY_DTYPE, Fingerprint, Rect, ReferenceRecord, SubRegion


def make_region(fingerprints, positions, index=0, bounds=None):
    records = tuple(
        ReferenceRecord(Fingerprint.from_pairs(fp), np.array(xy))
        for fp, xy in zip(fingerprints, positions)
    )
    if bounds is None:
        pos = np.array(positions)
        bounds = Rect(
            pos[:, 0].min() - 0.5,
            pos[:, 1].min() - 0.5,
            pos[:, 0].max() + 0.5,
            pos[:, 1].max() + 0.5,
        )
    return SubRegion.build(index, bounds, records)


def random_problem(rng, rows=None, cols=None, outputs=2):
    rows = rows or int(rng.integers(5, 50))
    cols = cols or int(rng.integers(1, 5))
    X_raw = rng.normal(-60.0, 8.0, size=(rows, cols))
    Y_raw = rng.normal(0.0, 2.0, size=(rows, outputs))
    return standardize_design(X_raw, Y_raw)


def kkt_residuals(problem, P, lam):
    """Largest violation of the stationarity conditions of the L1 objective."""
    grad = 2.0 / problem.n_rows * problem.X.T @ (problem.X @ P - problem.Y)
    worst = 0.0
    for idx in np.ndindex(P.shape):
        if P[idx] != 0:
            worst = max(worst, abs(grad[idx] + lam * np.sign(P[idx])))
        else:
            worst = max(worst, max(0.0, abs(grad[idx]) - lam))
    return worst


class TestBuildProblem:
    def test_identical_fingerprints_standardize_to_zero(self):
        fp = [(1, -60.0), (2, -55.0)]
        region = make_region([fp] * 4, [(0, 0), (0, 1), (1, 0), (1, 1)])
        problem = build_problem(region)
        assert np.all(problem.X == 0.0)
        assert np.all(problem.column_stds == 0.0)

    def test_two_row_column_is_plus_minus_one(self):
        # Hand computation: mean -55, population std 5 -> standardized +/-1.
        region = make_region(
            [[(1, -50.0)], [(1, -60.0)]], [(0.0, 0.0), (1.0, 0.0)]
        )
        problem = build_problem(region)
        assert problem.X[:, 0].tolist() == [1.0, -1.0]
        assert problem.column_means[0] == -55.0
        assert problem.column_stds[0] == 5.0

    def test_missing_fill_enters_design(self):
        region = make_region(
            [[(1, -50.0)], [(2, -60.0)]], [(0.0, 0.0), (1.0, 0.0)]
        )
        problem = build_problem(region, missing_value=-110.0)
        assert problem.column_means.tolist() == [-80.0, -85.0]

    def test_columns_centered(self):
        rng = np.random.default_rng(4)
        problem = random_problem(rng, rows=20, cols=6)
        assert np.abs(problem.X.mean(axis=0)).max() < 1e-12
        assert np.abs(problem.Y.mean(axis=0)).max() < 1e-12

    def test_fewer_than_two_records_rejected(self):
        region = make_region([[(1, -50.0)]], [(0.0, 0.0)])
        with pytest.raises(ValueError, match="at least 2"):
            build_problem(region)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            RegressionProblem(
                np.array([[np.inf]]), np.array([[0.0]]), np.zeros(1), np.ones(1)
            )


class TestLassoFit:
    def test_lambda_max_gives_exact_zeros(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            problem = random_problem(rng)
            lmax = lambda_max(problem)
            for lam in (lmax, 1.5 * lmax):
                P = lasso_fit(problem, lam).P
                assert np.all(P == 0.0)

    def test_just_below_lambda_max_is_nonzero(self):
        rng = np.random.default_rng(10)
        problem = random_problem(rng, rows=30, cols=3)
        P = lasso_fit(problem, 0.95 * lambda_max(problem)).P
        assert np.any(P != 0.0)

    def test_zero_lambda_matches_least_squares(self):
        # Tight sweep tolerance: the per-sweep change underestimates the
        # remaining distance to the normal-equations solution.
        rng = np.random.default_rng(11)
        X = rng.normal(size=(5, 3))
        problem = standardize_design(X, rng.normal(size=(5, 2)))
        P = lasso_fit(problem, 0.0, tol=1e-12).P
        expected, *_ = np.linalg.lstsq(problem.X, problem.Y, rcond=None)
        assert np.abs(P - expected).max() < 1e-8

    def test_scalar_closed_form(self):
        # (1/2)sum((p*x - y)^2) + lam*|p| with x=[1,-1], y=[1,-1]:
        # minimizer max(0, 1 - lam/2).
        problem = RegressionProblem(
            np.array([[1.0], [-1.0]]),
            np.array([[1.0], [-1.0]]),
            np.zeros(1),
            np.ones(1),
        )
        for lam in (0.0, 0.5, 1.0, 1.9, 2.0, 3.0):
            P = lasso_fit(problem, lam).P
            assert P[0, 0] == pytest.approx(max(0.0, 1.0 - lam / 2.0), abs=1e-12)

    def test_kkt_conditions(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            problem = random_problem(rng)
            lam = float(rng.uniform(0.05, 1.2)) * max(lambda_max(problem), 1e-6)
            P = lasso_fit(problem, lam).P
            assert kkt_residuals(problem, P, lam) <= 1e-6

    def test_objective_monotone_over_sweeps(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            problem = random_problem(rng, rows=40, cols=4)
            trace = []
            lasso_fit(problem, 0.1 * lambda_max(problem), objective_trace=trace)
            for per_dim in trace:
                assert len(per_dim) >= 1
                diffs = np.diff(np.array(per_dim))
                assert np.all(diffs <= 1e-12)

    def test_separability_of_outputs(self):
        """Joint entrywise-L1 objective equals the sum of per-column fits."""
        rng = np.random.default_rng(14)
        problem = random_problem(rng, rows=25, cols=4, outputs=2)
        lam = 0.2 * lambda_max(problem)
        P = lasso_fit(problem, lam).P
        total = lasso_objective(problem, P, lam)
        per_dim = 0.0
        for d in range(problem.Y.shape[1]):
            sub = RegressionProblem(
                problem.X,
                problem.Y[:, [d]],
                problem.column_means,
                problem.column_stds,
            )
            per_dim += lasso_objective(sub, P[:, [d]], lam)
        assert total == pytest.approx(per_dim, rel=1e-12)

    def test_zero_variance_column_stays_zero(self):
        problem = RegressionProblem(
            np.column_stack([np.zeros(6), np.linspace(-1, 1, 6)]),
            np.linspace(-1, 1, 6)[:, None],
            np.zeros(2),
            np.array([0.0, 1.0]),
        )
        P = lasso_fit(problem, 0.01).P
        assert P[0, 0] == 0.0
        assert P[1, 0] != 0.0

    def test_negative_lambda_rejected(self):
        rng = np.random.default_rng(15)
        with pytest.raises(ValueError):
            lasso_fit(random_problem(rng), -0.1)

    def test_warm_start_agrees_with_cold_start(self):
        rng = np.random.default_rng(16)
        problem = random_problem(rng, rows=30, cols=4)
        lam = 0.1 * lambda_max(problem)
        cold = lasso_fit(problem, lam).P
        warm = lasso_fit(problem, lam, warm_start=cold + rng.normal(0, 0.1, cold.shape)).P
        assert np.abs(cold - warm).max() < 1e-6

    @pytest.mark.skipif(not HAVE_NUMBA, reason="fallback is the active kernel")
    def test_numpy_fallback_matches_jit_kernel(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            problem = random_problem(rng, rows=25, cols=4, outputs=1)
            lam = float(rng.uniform(0.0, 1.0)) * max(lambda_max(problem), 1e-3)
            jit = lasso_fit(problem, lam).P[:, 0]
            p = np.zeros(problem.n_features)
            _cd_kernel_numpy(
                np.ascontiguousarray(problem.X.T),
                problem.Y[:, 0].copy(),
                lam,
                1e-8,
                100_000,
                p,
                np.empty(0),
            )
            assert np.abs(jit - p).max() < 1e-10


class TestSelectLambdaCV:
    def test_single_element_grid(self):
        rng = np.random.default_rng(18)
        problem = random_problem(rng, rows=20, cols=3)
        assert select_lambda_cv(problem, np.array([0.37]), folds=4) == 0.37

    def test_informative_feature_survives_chosen_lambda(self):
        """Exhaustive scan oracle: CV keeps the signal column active."""
        rng = np.random.default_rng(19)
        coord = np.linspace(-3, 3, 40)
        X_raw = np.column_stack(
            [coord + rng.normal(0, 0.05, 40)]
            + [rng.normal(0, 1, 40) for _ in range(3)]
        )
        problem = standardize_design(X_raw, coord[:, None])
        grid = default_lambda_grid(problem, n=10)
        lam = select_lambda_cv(problem, grid, folds=5)
        P = lasso_fit(problem, lam).P
        assert abs(P[0, 0]) > 1e-3

    def test_all_zero_models_tie_to_largest(self):
        rng = np.random.default_rng(20)
        problem = random_problem(rng, rows=20, cols=3)
        lmax = lambda_max(problem)
        grid = np.array([4.0, 2.0, 1.0]) * lmax
        assert select_lambda_cv(problem, grid, folds=4) == 4.0 * lmax

    def test_invalid_grids_rejected(self):
        rng = np.random.default_rng(21)
        problem = random_problem(rng, rows=12, cols=2)
        with pytest.raises(ValueError, match="positive"):
            select_lambda_cv(problem, np.array([1.0, 0.0]), folds=3)
        with pytest.raises(ValueError, match="non-empty"):
            select_lambda_cv(problem, np.array([]), folds=3)
        with pytest.raises(ValueError, match="descending"):
            select_lambda_cv(problem, np.array([0.1, 1.0]), folds=3)
        with pytest.raises(ValueError, match="folds"):
            select_lambda_cv(problem, np.array([1.0]), folds=1)


class TestRandomizedLasso:
    def grid_region(self, rng, n_keys=5, rows=24):
        positions = np.column_stack([np.linspace(0, 3, rows), rng.uniform(0, 3, rows)])
        fps = []
        for xy in positions:
            pairs = [
                (k, -50.0 - 8.0 * xy[0] * (k + 1) / n_keys + rng.normal(0, 0.5))
                for k in range(n_keys)
            ]
            fps.append(pairs)
        return make_region(fps, positions)

    def test_single_round_frequencies_are_binary(self):
        rng = np.random.default_rng(22)
        region = self.grid_region(rng)
        cfg = RandomizedLassoConfig(randomizations=1, seed=5)
        profile = randomized_lasso(region, cfg, lam=0.05)
        assert np.all(np.isin(profile.frequencies, [1.0]))

    def test_huge_lambda_empties_profile(self):
        rng = np.random.default_rng(23)
        region = self.grid_region(rng)
        profile = randomized_lasso(
            region, RandomizedLassoConfig(randomizations=8, seed=5), lam=1e6
        )
        assert len(profile) == 0

    def test_reproducible_bit_for_bit(self):
        rng = np.random.default_rng(24)
        region = self.grid_region(rng)
        cfg = RandomizedLassoConfig(randomizations=12, seed=77)
        a = randomized_lasso(region, cfg, lam=0.02)
        b = randomized_lasso(region, cfg, lam=0.02)
        assert np.array_equal(a.keys, b.keys)
        assert np.array_equal(a.frequencies, b.frequencies)
        c = randomized_lasso(region, RandomizedLassoConfig(randomizations=12, seed=78), lam=0.02)
        assert not (
            np.array_equal(a.keys, c.keys)
            and np.array_equal(a.frequencies, c.frequencies)
        )

    def test_profile_sorted_by_frequency_then_key(self):
        rng = np.random.default_rng(25)
        region = self.grid_region(rng, n_keys=8)
        profile = randomized_lasso(
            region, RandomizedLassoConfig(randomizations=16, seed=3), lam=0.3
        )
        pairs = list(zip(profile.frequencies.tolist(), profile.keys.tolist()))
        assert pairs == sorted(pairs, key=lambda t: (-t[0], t[1]))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RandomizedLassoConfig(sampling_ratio=1.0)
        with pytest.raises(ValueError):
            RandomizedLassoConfig(randomizations=0)
        with pytest.raises(ValueError):
            RandomizedLassoConfig(relevance_threshold=0.0)

    def test_paper_defaults(self):
        cfg = RandomizedLassoConfig()
        assert cfg.randomizations == 200
        assert cfg.relevance_threshold == 1e-4
        assert 0.0 < cfg.sampling_ratio < 1.0


class TestTakeRelevant:
    def profile(self):
        return RelevanceProfile(
            np.array([10, 3, 7, 1], dtype=KEY_DTYPE),
            np.array([1.0, 0.9, 0.5, 0.2]),
        )

    def test_top_h_available(self):
        available = np.array([1, 3, 7, 10], dtype=KEY_DTYPE)
        assert take_relevant(self.profile(), 3, available).tolist() == [10, 3, 7]

    def test_availability_filter(self):
        available = np.array([1, 7], dtype=KEY_DTYPE)
        assert take_relevant(self.profile(), 3, available).tolist() == [7, 1]

    def test_disjoint_availability_is_empty(self):
        available = np.array([99], dtype=KEY_DTYPE)
        assert len(take_relevant(self.profile(), 3, available)) == 0

    def test_h_must_be_positive(self):
        with pytest.raises(ValueError):
            take_relevant(self.profile(), 0, np.array([1], dtype=KEY_DTYPE))
