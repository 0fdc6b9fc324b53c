import numpy as np
import pytest

from stag.gbm import (GbmParams, fit, from_text, grid_search_cv, load_model,
                      mean_squared_error, param_grid, predict, r_squared,
                      save_model, to_text)


def brute_force_root_split(X, y, min_samples_leaf):
    """Exhaustive best first split, scanning raw thresholds.

    Scores every (feature, threshold-between-uniques) partition with
    gain = s_l^2/n_l + s_r^2/n_r - s_p^2/n_p over mean-centered targets.
    Ties keep the earliest feature, then the lowest threshold.
    """
    resid = y - y.mean()
    n = X.shape[0]
    s_p = resid.sum()
    parent = s_p * s_p / n
    best = None
    for feat in range(X.shape[1]):
        uniq = np.unique(X[:, feat])
        for b in range(uniq.shape[0] - 1):
            left = X[:, feat] <= uniq[b]
            n_l = int(left.sum())
            n_r = n - n_l
            if n_l < min_samples_leaf or n_r < min_samples_leaf:
                continue
            s_l = resid[left].sum()
            s_r = s_p - s_l
            gain = s_l * s_l / n_l + s_r * s_r / n_r - parent
            if gain > 0.0 and (best is None or gain > best[0]):
                best = (gain, feat, b)
    return best


def _single_split_params(min_samples_leaf=1):
    return GbmParams(n_rounds=1, learning_rate=1.0, max_leaves=2,
                     max_depth=1, min_samples_leaf=min_samples_leaf)


class TestRootSplit:
    @pytest.mark.parametrize("seed", range(12))
    def test_matches_exhaustive_scan(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 65))
        d = int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        expected = brute_force_root_split(X, y, 1)
        model = fit(X, y, _single_split_params())
        kind, feat, threshold_bin, _ = model.trees[0][0]
        assert kind == "split"
        assert (feat, threshold_bin) == expected[1:]

    @pytest.mark.parametrize("seed", [100, 101, 102])
    def test_respects_min_samples_leaf(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        expected = brute_force_root_split(X, y, 10)
        model = fit(X, y, _single_split_params(min_samples_leaf=10))
        kind, feat, threshold_bin, _ = model.trees[0][0]
        assert kind == "split"
        assert (feat, threshold_bin) == expected[1:]
        # both leaves really hold >= 10 rows
        left = X[:, feat] <= np.unique(X[:, feat])[threshold_bin]
        assert 10 <= left.sum() <= 20

    def test_duplicate_feature_breaks_tie_to_lowest(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        X = np.column_stack([x, x])
        y = np.array([0.0, 0.0, 5.0, 5.0])
        model = fit(X, y, _single_split_params())
        _, feat, threshold_bin, _ = model.trees[0][0]
        assert feat == 0
        assert threshold_bin == 1

    def test_leaf_values_are_partition_means(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([1.0, 3.0, 10.0, 14.0])
        model = fit(X, y, _single_split_params())
        pred = predict(model, X)
        np.testing.assert_allclose(pred[:2], np.mean(y[:2]))
        np.testing.assert_allclose(pred[2:], np.mean(y[2:]))


class TestFit:
    @pytest.mark.parametrize("seed", [0, 7, 23])
    def test_training_mse_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(300, 4))
        y = X[:, 0] * 2.0 + np.sin(X[:, 1]) + 0.1 * rng.normal(size=300)
        model = fit(X, y, GbmParams(n_rounds=60))
        # entry 0 is the mean-only baseline, then one entry per round
        mse = np.asarray(model.train_mse)
        assert mse.shape[0] == 61
        assert np.all(np.diff(mse) <= 1e-12)

    def test_depth_zero_predicts_the_mean(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(100, 3))
        y = rng.normal(size=100)
        model = fit(X, y, GbmParams(n_rounds=10, max_depth=0))
        pred = predict(model, X)
        np.testing.assert_allclose(pred, np.mean(y))
        assert r_squared(y, pred) == 0.0

    def test_learns_identity_function(self):
        x = np.linspace(-1.0, 1.0, 200)
        X = x[:, None]
        params = GbmParams(n_rounds=50, max_depth=3, min_samples_leaf=2)
        model = fit(X, x, params)
        assert r_squared(x, predict(model, X)) >= 0.99

    def test_two_feature_interaction(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-1, 1, size=(500, 2))
        y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
        params = GbmParams(n_rounds=40, max_depth=3, min_samples_leaf=5)
        model = fit(X, y, params)
        assert r_squared(y, predict(model, X)) >= 0.95

    def test_refit_is_bit_identical(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(150, 3))
        y = rng.normal(size=150)
        a = fit(X, y, GbmParams(n_rounds=20))
        b = fit(X, y, GbmParams(n_rounds=20))
        assert to_text(a) == to_text(b)

    def test_too_few_rows_rejected(self):
        X = np.zeros((10, 2))
        y = np.zeros(10)
        with pytest.raises(ValueError):
            fit(X, y, GbmParams(min_samples_leaf=20))

    def test_non_finite_inputs_rejected(self):
        X = np.ones((50, 2))
        X[3, 1] = np.nan
        with pytest.raises(ValueError):
            fit(X, np.ones(50), GbmParams(min_samples_leaf=1))

    def test_predict_checks_feature_count(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(60, 3))
        model = fit(X, rng.normal(size=60), GbmParams(n_rounds=2))
        with pytest.raises(ValueError):
            predict(model, rng.normal(size=(5, 2)))


class TestParams:
    @pytest.mark.parametrize("kwargs", [
        {"n_rounds": 0},
        {"learning_rate": 0.0},
        {"learning_rate": 1.5},
        {"max_leaves": 1},
        {"max_depth": -1},
        {"min_samples_leaf": 0},
        {"n_bins": 1},
        {"n_bins": 256},
    ])
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GbmParams(**kwargs)

    def test_param_grid_is_cross_product(self):
        grid = param_grid(learning_rate=[0.05, 0.1],
                          max_leaves=[15, 31, 63])
        assert len(grid) == 6
        assert grid[0].learning_rate == 0.05 and grid[0].max_leaves == 15
        assert grid[-1].learning_rate == 0.1 and grid[-1].max_leaves == 63

    def test_param_grid_rejects_unknown_axis(self):
        with pytest.raises(ValueError):
            param_grid(rounds=[10])


class TestGridSearch:
    @pytest.fixture()
    def data(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(120, 3))
        y = X[:, 0] + 0.5 * X[:, 1] ** 2 + 0.05 * rng.normal(size=120)
        return X, y

    def test_sane_rate_beats_vanishing_rate(self, data):
        X, y = data
        base = GbmParams(n_rounds=30, min_samples_leaf=5)
        grid = param_grid(base, learning_rate=[1e-6, 0.1])
        report = grid_search_cv(X, y, grid, k=5, seed=0)
        assert report.best_params.learning_rate == 0.1
        assert report.results[1].mean_mse < report.results[0].mean_mse

    def test_tie_keeps_first_grid_point(self, data):
        X, y = data
        params = GbmParams(n_rounds=5, min_samples_leaf=5)
        report = grid_search_cv(X, y, [params, params], k=3, seed=0)
        assert report.best_index == 0
        assert report.results[0].fold_mse == report.results[1].fold_mse

    def test_fold_bookkeeping(self, data):
        X, y = data
        report = grid_search_cv(
            X, y, [GbmParams(n_rounds=5, min_samples_leaf=5)], k=4, seed=2)
        assert report.n_folds == 4
        assert len(report.results[0].fold_mse) == 4
        assert len(report.results[0].fold_r2) == 4
        assert report.results[0].mean_mse == pytest.approx(
            np.mean(report.results[0].fold_mse))

    def test_same_seed_same_outcome(self, data):
        X, y = data
        grid = param_grid(GbmParams(n_rounds=5, min_samples_leaf=5),
                          max_depth=[2, 4])
        a = grid_search_cv(X, y, grid, k=3, seed=9)
        b = grid_search_cv(X, y, grid, k=3, seed=9)
        assert a.results[0].fold_mse == b.results[0].fold_mse
        assert a.best_index == b.best_index

    def test_empty_grid_rejected(self, data):
        X, y = data
        with pytest.raises(ValueError):
            grid_search_cv(X, y, [], k=3)


class TestSerialization:
    @pytest.fixture()
    def model(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(200, 4))
        y = X[:, 0] - X[:, 2] ** 2 + 0.1 * rng.normal(size=200)
        return fit(X, y, GbmParams(n_rounds=15, min_samples_leaf=5)), X

    def test_round_trip_is_byte_identical(self, model):
        fitted, _ = model
        text = to_text(fitted)
        assert to_text(from_text(text)) == text

    def test_round_trip_preserves_predictions(self, model, tmp_path):
        fitted, X = model
        path = tmp_path / "model.txt"
        save_model(fitted, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(predict(fitted, X),
                                      predict(loaded, X))

    def test_header_carries_format_version(self, model):
        fitted, _ = model
        assert to_text(fitted).splitlines()[0] == "stag-gbm v1"

    def test_unknown_version_rejected(self, model):
        fitted, _ = model
        text = to_text(fitted).replace("stag-gbm v1", "stag-gbm v2", 1)
        with pytest.raises(ValueError, match="stag-gbm v1"):
            from_text(text)

    def test_truncated_text_rejected(self, model):
        fitted, _ = model
        lines = to_text(fitted).splitlines()
        assert lines[-1] == "end"
        with pytest.raises(ValueError):
            from_text("\n".join(lines[:-1]))

    def test_garbled_node_line_rejected(self, model):
        fitted, _ = model
        text = to_text(fitted).replace(" split ", " branch ", 1)
        with pytest.raises(ValueError):
            from_text(text)


class TestMetHelpers:
    def test_mse_hand_value(self):
        assert mean_squared_error([1.0, 2.0, 3.0],
                                  [1.0, 2.0, 5.0]) == pytest.approx(4 / 3)

    def test_r_squared_perfect_and_mean(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        assert r_squared(y, y) == 1.0
        assert r_squared(y, np.full(4, y.mean())) == 0.0

    def test_r_squared_constant_target(self):
        y = np.ones(5)
        assert r_squared(y, np.ones(5)) == 1.0
        assert r_squared(y, np.zeros(5)) == 0.0
