import math

import numpy as np
import pytest

from stag.fusion import (DegenerateInputError, FeatureSpec, NormStats,
                         build_features, denormalize, evaluate_model,
                         format_fit_report, holdout_report, load_stag_model,
                         moving_average, noise_reduce, pearson,
                         save_stag_model, select_axes, snr_db,
                         spline_midpoints, train_stag, upsample, znormalize)
from stag.gbm import GbmParams
from stag.ingest import bifurcate
from stag.sensorsim import (ChannelModel, MisalignmentProfile, SensorStream,
                            sample_stream, synth_source)

FAST_GRID = [GbmParams(n_rounds=40, min_samples_leaf=5)]
HALF_PERIOD = MisalignmentProfile(phase_fraction=0.5)


def _r2(pred, truth):
    return 1.0 - np.sum((pred - truth) ** 2) / np.sum(
        (truth - truth.mean()) ** 2)


def _stream(values, rate=400.0, kind="accel"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    period = round(1e9 / rate)
    ts = np.arange(values.shape[1], dtype=np.int64) * period
    return SensorStream(kind, ts, values, rate)


@pytest.fixture(scope="module")
def capture():
    """A 400 Hz training capture: single-axis accel plus aligned gyro."""
    src = synth_source(42, 6.0, 3)
    ch = ChannelModel(accel_snr_db=25.0, gyro_snr_db=15.0)
    accel = sample_stream(src, ch, "accel_z", 400.0)
    gyro = sample_stream(src, ch, "gyro", 400.0)
    return src, ch, accel, gyro


@pytest.fixture(scope="module")
def trained(capture):
    _, _, accel, gyro = capture
    bif = bifurcate(accel, gyro)
    return bif, train_stag(bif, grid=FAST_GRID)


class TestZnormalize:
    def test_hand_values(self):
        normed, stats = znormalize(np.array([1.0, 2.0, 3.0]))
        assert stats.mean == 2.0
        assert stats.std == pytest.approx(math.sqrt(2.0 / 3.0))
        np.testing.assert_allclose(
            normed, [-1.224744871391589, 0.0, 1.224744871391589])

    def test_round_trip(self):
        values = np.array([4.0, -1.0, 7.5, 0.25])
        normed, stats = znormalize(values)
        np.testing.assert_allclose(denormalize(normed, stats), values)

    def test_frozen_stats_are_applied_verbatim(self):
        stats = NormStats(mean=10.0, std=2.0)
        normed, out = znormalize(np.array([10.0, 14.0]), stats)
        assert out is stats
        np.testing.assert_array_equal(normed, [0.0, 2.0])

    def test_constant_input_rejected(self):
        with pytest.raises(DegenerateInputError):
            znormalize(np.full(10, 3.3))

    def test_degenerate_error_is_a_value_error(self):
        assert issubclass(DegenerateInputError, ValueError)


class TestNoiseReduce:
    def test_moving_average_hand_values(self):
        out = moving_average(np.array([0.0, 3.0, 6.0, 9.0]), 3)
        np.testing.assert_allclose(out, [1.5, 3.0, 6.0, 7.5])

    def test_moving_average_preserves_constants(self):
        np.testing.assert_array_equal(moving_average(np.full(20, 5.0), 7),
                                      np.full(20, 5.0))

    def test_removes_slow_drift(self):
        t = np.arange(2000) / 400.0
        sine = np.sin(2 * math.pi * 100.0 * t)
        stream = _stream(sine + 3.0 + 0.5 * t)
        out = noise_reduce(stream, 51).values[0]
        np.testing.assert_allclose(out[100:-100], sine[100:-100], atol=0.02)

    def test_speech_band_passes_with_little_loss(self):
        t = np.arange(4000) / 400.0
        sine = np.sin(2 * math.pi * 100.0 * t)
        out = noise_reduce(_stream(sine), 51).values[0]
        interior = slice(51, -51)
        ratio = np.sqrt(np.mean(out[interior] ** 2)
                        / np.mean(sine[interior] ** 2))
        assert ratio == pytest.approx(1.0, abs=0.02)

    def test_window_validation(self):
        stream = _stream(np.arange(20.0))
        with pytest.raises(ValueError):
            noise_reduce(stream, 4)
        with pytest.raises(ValueError):
            noise_reduce(stream, 1)


class TestSignalStats:
    def test_snr_hand_value(self):
        signal = np.tile([1.0, -1.0], 50)
        noise = np.tile([0.1, -0.1], 50)
        assert snr_db(signal, noise) == pytest.approx(20.0)

    def test_snr_infinities(self):
        signal = np.ones(10)
        assert snr_db(signal, np.zeros(10)) == math.inf
        assert snr_db(np.zeros(10), signal) == -math.inf

    def test_snr_allows_unequal_lengths(self):
        assert snr_db(np.ones(100), np.full(7, 0.5)) == pytest.approx(
            10 * math.log10(4.0))

    def test_snr_needs_two_samples(self):
        with pytest.raises(ValueError):
            snr_db(np.ones(1), np.ones(10))

    def test_pearson_perfect(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_pearson_orthogonal_tones(self):
        t = np.arange(400) / 400.0
        assert abs(pearson(np.sin(2 * math.pi * 100 * t),
                           np.cos(2 * math.pi * 100 * t))) < 1e-10

    def test_pearson_validation(self):
        with pytest.raises(ValueError):
            pearson(np.ones(3), np.ones(4))
        with pytest.raises(DegenerateInputError):
            pearson(np.ones(5), np.arange(5.0))


class TestSelectAxes:
    @pytest.fixture()
    def streams(self):
        rng = np.random.default_rng(0)
        t = np.arange(4000) / 400.0
        s = np.sin(2 * math.pi * 120.0 * t)
        jitter = 0.01 * rng.normal(size=(3, 4000))
        accel = _stream(np.stack([0.2 * s, 0.1 * s, s]) + jitter)
        gyro_axes = np.stack([np.roll(s, 1), 0.5 * s, np.zeros(4000)])
        gyro = _stream(gyro_axes + 0.05 * rng.normal(size=(3, 4000)),
                       kind="gyro")
        return accel, gyro

    def test_strongest_accel_axis_wins(self, streams):
        accel, gyro = streams
        accel_axis, _, report = select_axes(accel, gyro)
        assert accel_axis == 2
        assert report.accel_snr_db[2] == max(report.accel_snr_db)

    def test_gyro_axes_ranked_by_lagged_correlation(self, streams):
        accel, gyro = streams
        _, gyro_axes, report = select_axes(accel, gyro)
        assert gyro_axes == (0, 1)
        assert report.gyro_ranking[:2] == (0, 1)
        assert report.gyro_score[0] > report.gyro_score[1] > \
            report.gyro_score[2]

    def test_lag_search_recovers_one_sample_shift(self, streams):
        accel, gyro = streams
        _, _, report = select_axes(accel, gyro)
        assert report.gyro_best_lag[0] == 1

    def test_noise_capture_overrides_spectral_estimate(self, streams):
        accel, gyro = streams
        rng = np.random.default_rng(1)
        noise = _stream(0.01 * rng.normal(size=(3, 2000)))
        _, _, report = select_axes(accel, gyro, noise=noise)
        expected = snr_db(accel.values[2], noise.values[2])
        assert report.accel_snr_db[2] == pytest.approx(expected)

    def test_degenerate_winner_rejected(self, streams):
        _, gyro = streams
        flat = _stream(np.zeros((3, 4000)))
        with pytest.raises(DegenerateInputError):
            select_axes(flat, gyro)

    def test_gyro_needs_two_axes(self, streams):
        accel, _ = streams
        mono = _stream(np.ones((1, 4000)), kind="gyro")
        with pytest.raises(ValueError):
            select_axes(accel, mono)


class TestSplineMidpoints:
    def test_exact_on_cubic(self):
        period = 5_000_000
        ts = np.arange(0, 200, dtype=np.int64) * period
        t = ts / 1e9
        values = t**3 - 2 * t**2 + t
        stream = SensorStream("accel", ts, values[None, :], 200.0)
        mids = spline_midpoints(stream)
        mid_t = ((ts[:-1] + ts[1:]) // 2) / 1e9
        expected = mid_t**3 - 2 * mid_t**2 + mid_t
        assert np.max(np.abs(mids - expected)) < 1e-9

    def test_needs_four_samples(self):
        stream = _stream([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            spline_midpoints(stream)

    def test_aliased_tone_defeats_the_spline(self):
        # 150 Hz sampled at 200 Hz: the spline sees the 50 Hz alias and
        # its midpoint guesses are badly wrong.
        ts = np.arange(400, dtype=np.int64) * 5_000_000
        t = ts / 1e9
        stream = SensorStream("accel", ts,
                              np.sin(2 * math.pi * 150.0 * t)[None, :], 200.0)
        mids = spline_midpoints(stream)
        mid_t = ((ts[:-1] + ts[1:]) // 2) / 1e9
        truth = np.sin(2 * math.pi * 150.0 * mid_t)
        ss_res = np.sum((mids - truth) ** 2)
        ss_tot = np.sum((truth - truth.mean()) ** 2)
        assert 1.0 - ss_res / ss_tot < 0.0


class TestFeatureSpec:
    def test_default_column_count(self):
        assert FeatureSpec().n_base_columns == 11

    def test_gyro_only_single_column(self):
        spec = FeatureSpec(accel_window=0, gyro_window=0, gyro_axes=("x",))
        assert spec.n_base_columns == 1

    def test_accel_only(self):
        spec = FeatureSpec(accel_window=3, gyro_axes=())
        assert spec.n_base_columns == 7
        assert spec.gyro_axis_indices() == ()

    def test_axis_indices(self):
        assert FeatureSpec(gyro_axes=("z", "x")).gyro_axis_indices() == (2, 0)

    @pytest.mark.parametrize("kwargs", [
        {"accel_window": -1},
        {"accel_window": 0, "gyro_axes": ()},
        {"gyro_axes": ("x", "x")},
        {"gyro_axes": ("w",)},
        {"smoothing_window": 4},
        {"smoothing_window": 1},
    ])
    def test_invalid_specs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            FeatureSpec(**kwargs)


class TestBuildFeatures:
    def test_column_layout(self, trained):
        bif, _ = trained
        spec = FeatureSpec()
        X, y, kept = build_features(bif, spec)
        assert X.shape[1] == 11
        assert X.shape[0] == y.shape[0] == kept.shape[0]
        np.testing.assert_array_equal(y, bif.even_accel.values[0][kept])

    def test_extra_columns_appended_in_order(self, trained):
        bif, _ = trained
        spec = FeatureSpec()
        n_mid = bif.odd_accel.n_samples - 1
        stage1 = np.arange(n_mid, dtype=float)
        spline = -np.arange(n_mid, dtype=float)
        X, _, kept = build_features(bif, spec, stage1_pred=stage1,
                                    spline_pred=spline)
        assert X.shape[1] == 13
        np.testing.assert_array_equal(X[:, 11], stage1[kept])
        np.testing.assert_array_equal(X[:, 12], spline[kept])

    def test_edge_rows_dropped(self, trained):
        bif, _ = trained
        _, _, kept = build_features(bif, FeatureSpec(accel_window=3))
        n_mid = bif.odd_accel.n_samples - 1
        assert kept[0] >= 2
        assert kept[-1] <= n_mid - 1
        assert np.all(np.diff(kept) > 0)

    def test_accel_window_values_come_from_odd_stream(self, trained):
        bif, _ = trained
        spec = FeatureSpec(accel_window=1, gyro_axes=())
        X, _, kept = build_features(bif, spec)
        i = kept[5]
        odd = bif.odd_accel.values[0]
        np.testing.assert_array_equal(X[5], [odd[i - 1], odd[i], odd[i + 1]])


class TestTraining:
    def test_stage_reports_tell_the_story(self, trained):
        _, result = trained
        spline, stage1, combined = result.reports
        assert (spline.stage, stage1.stage, combined.stage) == \
            ("spline", "gbm", "combined")
        # sub-Nyquist content ruins the spline; the fusion recovers it
        assert spline.r_squared < 0.5
        assert stage1.r_squared > 0.9
        assert combined.r_squared >= stage1.r_squared - 0.01
        assert combined.r_squared > 0.95

    def test_report_formatting(self, trained):
        _, result = trained
        line = format_fit_report(result.reports[2])
        assert line.startswith("stage=combined r_squared=")
        assert "n_rows=" in line

    def test_cv_skipped_for_single_point_grid(self, trained):
        _, result = trained
        assert result.cv is None

    def test_grid_search_populates_cv_report(self, capture):
        _, _, accel, gyro = capture
        bif = bifurcate(accel.take(np.arange(1600)),
                        gyro.take(np.arange(1600)))
        grid = [GbmParams(n_rounds=10, min_samples_leaf=5),
                GbmParams(n_rounds=10, min_samples_leaf=5,
                          learning_rate=1e-6)]
        result = train_stag(bif, grid=grid, cv_folds=3)
        assert result.cv is not None
        assert result.cv.best_index == 0
        assert result.model.stage1.params.learning_rate == 0.1

    def test_training_is_deterministic(self, trained, tmp_path):
        bif, result = trained
        again = train_stag(bif, grid=FAST_GRID)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        save_stag_model(result.model, a)
        save_stag_model(again.model, b)
        assert a.read_bytes() == b.read_bytes()


class TestEvaluate:
    def test_same_capture_reproduces_training_numbers(self, trained):
        bif, result = trained
        reports = evaluate_model(result.model, bif)
        for fresh, ref in zip(reports, result.reports):
            assert fresh.r_squared == pytest.approx(ref.r_squared, abs=1e-9)
            assert fresh.n_rows == ref.n_rows

    def test_generalizes_to_a_jittered_recapture(self, capture, trained):
        src, ch, _, _ = capture
        _, result = trained
        profile = MisalignmentProfile(0.0, 2e-5)
        accel = sample_stream(src, ch, "accel_z", 400.0, profile)
        gyro = sample_stream(src, ch, "gyro", 400.0, profile)
        reports = evaluate_model(result.model, bifurcate(accel, gyro))
        assert reports[2].r_squared > 0.9


class TestUpsample:
    def test_output_shape_rate_and_sample_preservation(self, capture, trained):
        src, ch, _, _ = capture
        _, result = trained
        odd = sample_stream(src, ch, "accel_z", 200.0)
        gyro = sample_stream(src, ch, "gyro", 200.0,
                             profile=HALF_PERIOD)
        out = upsample(result.model, odd, gyro)
        assert out.nominal_rate == 400.0
        assert out.n_samples == 2 * odd.n_samples - 1
        np.testing.assert_array_equal(out.values[0][0::2], odd.values[0])
        np.testing.assert_array_equal(out.timestamps[0::2], odd.timestamps)
        np.testing.assert_array_equal(
            out.timestamps[1::2],
            (odd.timestamps[:-1] + odd.timestamps[1:]) // 2)

    def test_reconstruction_beats_spline(self, capture, trained):
        src, ch, _, _ = capture
        _, result = trained
        odd = sample_stream(src, ch, "accel_z", 200.0)
        gyro = sample_stream(src, ch, "gyro", 200.0,
                             profile=HALF_PERIOD)
        out = upsample(result.model, odd, gyro)
        clean = ChannelModel()
        truth = sample_stream(src, clean, "accel_z", 400.0,
                              timestamps_ns=out.timestamps)
        fused = out.values[0][1::2]
        ideal = truth.values[0][1::2]
        spline = spline_midpoints(odd)
        assert _r2(fused, ideal) > 0.9
        assert _r2(fused, ideal) > _r2(spline, ideal)

    def test_interior_gyro_gap_rejected(self, capture, trained):
        src, ch, _, _ = capture
        _, result = trained
        odd = sample_stream(src, ch, "accel_z", 200.0)
        gyro = sample_stream(src, ch, "gyro", 200.0,
                             profile=HALF_PERIOD)
        keep = np.concatenate([np.arange(0, 300),
                               np.arange(320, gyro.n_samples)])
        with pytest.raises(ValueError, match="midpoint"):
            upsample(result.model, odd, gyro.take(keep))

    def test_multi_axis_odd_stream_rejected(self, capture, trained):
        src, ch, _, _ = capture
        _, result = trained
        tri = sample_stream(src, ch, "accel", 200.0)
        gyro = sample_stream(src, ch, "gyro", 200.0,
                             profile=HALF_PERIOD)
        with pytest.raises(ValueError):
            upsample(result.model, tri, gyro)


class TestHoldout:
    def test_split_reports_and_generalization(self, capture):
        _, _, accel, gyro = capture
        bif = bifurcate(accel, gyro)
        report = holdout_report(bif, FeatureSpec(), FAST_GRID,
                                ratios=(0.7, 0.15, 0.15), seed=0)
        assert set(report.reports) == {"train", "validation", "test"}
        sizes = report.split_sizes
        assert abs(sizes[0] - 0.7 * sum(sizes)) <= 1
        test_combined = report.reports["test"][2]
        assert test_combined.stage == "combined"
        assert test_combined.r_squared > 0.5


class TestModelSerialization:
    def test_round_trip_predictions_identical(self, capture, trained,
                                              tmp_path):
        src, ch, _, _ = capture
        _, result = trained
        path = tmp_path / "model.txt"
        save_stag_model(result.model, path)
        assert path.read_text().splitlines()[0] == "stag-model v1"
        loaded = load_stag_model(path)
        assert loaded.spec == result.model.spec
        assert loaded.accel_stats == result.model.accel_stats
        odd = sample_stream(src, ch, "accel_z", 200.0)
        gyro = sample_stream(src, ch, "gyro", 200.0,
                             profile=HALF_PERIOD)
        np.testing.assert_array_equal(
            upsample(result.model, odd, gyro).values,
            upsample(loaded, odd, gyro).values)

    def test_unknown_version_rejected(self, trained, tmp_path):
        _, result = trained
        path = tmp_path / "model.txt"
        save_stag_model(result.model, path)
        text = path.read_text().replace("stag-model v1", "stag-model v9", 1)
        path.write_text(text)
        with pytest.raises(ValueError):
            load_stag_model(path)
