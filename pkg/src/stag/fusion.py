"""Two-stage sensor fusion that doubles an accelerometer's sample rate.

The rate-capped accelerometer stream (the "odd" half of a full-rate
capture) misses every second sample.  A misaligned gyroscope, whose
samples land midway between accelerometer samples, observed the same
vibration source at exactly the missing instants.  This module recovers
the missing samples in two stages:

* stage 1: boosted trees predict each missing value from windows of
  neighboring accelerometer and gyroscope samples;
* stage 2: a second boosted model refines stage 1 by adding the stage-1
  prediction and a not-a-knot cubic-spline midpoint estimate as features.

All channels are mean/variance normalized (statistics frozen at training
time) after a moving-average baseline is removed; the baseline is restored
when reconstructing output samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import gbm
from .ingest import BifurcatedSet, interleave, split_dataset
from .sensorsim import SensorStream

_MODEL_HEADER = "stag-model v1"
_AXIS_NAMES = ("x", "y", "z")

STAGE_SPLINE = "spline"
STAGE_GBM = "gbm"
STAGE_COMBINED = "combined"


class DegenerateInputError(ValueError):
    """Input with no usable variation (constant channel, zero variance)."""


@dataclass(frozen=True)
class NormStats:
    """Mean and population standard deviation of one channel."""

    mean: float
    std: float


@dataclass(frozen=True)
class FeatureSpec:
    """Feature window layout for the fusion model.

    ``accel_window`` counts accelerometer neighbors on each side of the
    gap; when it is w >= 1 the row carries the 2w+1 samples centered on
    the sample just before the gap, and when it is 0 the accelerometer
    contributes no columns.  Each gyro axis contributes the 2g+1 samples
    centered on the gyro sample nearest the gap midpoint.  ``gyro_axes``
    name stream channel positions ("x" is channel 0, "y" channel 1, "z"
    channel 2).  ``smoothing_window`` is the moving-average width used for
    baseline removal before normalization.
    """

    accel_window: int = 2
    gyro_window: int = 1
    gyro_axes: tuple[str, ...] = ("x", "y")
    include_spline: bool = True
    smoothing_window: int = 51

    def __post_init__(self) -> None:
        if self.accel_window < 0 or self.gyro_window < 0:
            raise ValueError("windows must be >= 0")
        if self.accel_window == 0 and not self.gyro_axes:
            raise ValueError("at least one feature source must be enabled")
        seen = set()
        for name in self.gyro_axes:
            if name not in _AXIS_NAMES:
                raise ValueError(f"unknown gyro axis {name!r}")
            if name in seen:
                raise ValueError(f"gyro axis {name!r} listed twice")
            seen.add(name)
        if self.smoothing_window < 3 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be odd and >= 3")

    @property
    def n_base_columns(self) -> int:
        accel = 2 * self.accel_window + 1 if self.accel_window >= 1 else 0
        return accel + (2 * self.gyro_window + 1) * len(self.gyro_axes)

    def gyro_axis_indices(self) -> tuple[int, ...]:
        return tuple(_AXIS_NAMES.index(a) for a in self.gyro_axes)


@dataclass(frozen=True)
class FitReport:
    """Goodness of fit of one prediction stage on one row subset."""

    stage: str
    r_squared: float
    mse: float
    n_rows: int


def format_fit_report(report: FitReport) -> str:
    return (f"stage={report.stage} r_squared={report.r_squared:.4f} "
            f"mse={report.mse:.6e} n_rows={report.n_rows}")


def znormalize(values: np.ndarray, stats: NormStats | None = None
               ) -> tuple[np.ndarray, NormStats]:
    """Z-score values; returns the normalized array and the stats used.

    Without provided stats the mean and population standard deviation are
    computed from the data (two or more samples required); zero or
    non-finite variance raises :class:`DegenerateInputError`.
    """
    v = np.asarray(values, dtype=float)
    if stats is None:
        if v.size < 2:
            raise ValueError("need at least 2 samples to compute stats")
        mean = float(v.mean())
        std = float(v.std())
        if not (math.isfinite(std) and std > 0.0):
            raise DegenerateInputError(
                "zero or non-finite variance; cannot normalize"
            )
        stats = NormStats(mean=mean, std=std)
    return (v - stats.mean) / stats.std, stats


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(values, dtype=float) * stats.std + stats.mean


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge truncation (shorter end windows)."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(v)])
    hi = np.minimum(np.arange(n) + half + 1, n)
    lo = np.maximum(np.arange(n) - half, 0)
    return (csum[hi] - csum[lo]) / (hi - lo)


def noise_reduce(stream: SensorStream, window: int = 51) -> SensorStream:
    """Subtract a per-channel moving-average baseline (default width 51).

    The window is wide relative to speech-band periods, so in-band content
    passes nearly untouched while slow drift is removed.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    if stream.n_samples < 8:
        raise ValueError("need at least 8 samples to remove a baseline")
    values = np.stack([stream.values[ax] - moving_average(stream.values[ax],
                                                          window)
                       for ax in range(stream.n_axes)])
    return stream.with_values(values)


def snr_db(signal: np.ndarray, noise: np.ndarray) -> float:
    """Signal-to-noise ratio 10*log10(P_signal / P_noise) in dB.

    Powers are mean squares.  Zero noise power returns +inf; zero signal
    power over nonzero noise returns -inf.
    """
    s = np.asarray(signal, dtype=float).ravel()
    n = np.asarray(noise, dtype=float).ravel()
    if s.size < 2 or n.size < 2:
        raise ValueError("signal and noise need at least 2 samples each")
    p_signal = float(np.mean(s**2))
    p_noise = float(np.mean(n**2))
    if p_noise == 0.0:
        return math.inf
    if p_signal == 0.0:
        return -math.inf
    return 10.0 * math.log10(p_signal / p_noise)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation coefficient of two equal-length sequences."""
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("sequences must have equal length")
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.sum(xd**2)))
    sy = float(np.sqrt(np.sum(yd**2)))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("zero variance; correlation undefined")
    r = float(np.dot(xd, yd) / (sx * sy))
    return max(-1.0, min(1.0, r))


def _spectral_snr_db(values: np.ndarray) -> float:
    # Noise floor from the periodogram median: for white noise the
    # periodogram bins are chi-squared with 2 dof, whose median is ln 2
    # times the mean, so median / ln 2 estimates the per-bin noise level.
    x = values - values.mean()
    p = np.abs(np.fft.rfft(x))[1:] ** 2
    if p.size < 4:
        raise ValueError("stream too short for a spectral SNR estimate")
    total = float(p.sum())
    if total == 0.0:
        return -math.inf
    noise = float(np.median(p)) / math.log(2.0) * p.size
    if noise <= 0.0:
        return math.inf
    signal = total - noise
    if signal <= 0.0:
        return -math.inf
    return 10.0 * math.log10(signal / noise)


@dataclass(frozen=True)
class AxisSelectionReport:
    accel_snr_db: tuple[float, ...]
    gyro_score: tuple[float, ...]
    gyro_best_lag: tuple[int, ...]
    gyro_ranking: tuple[int, ...]


def _lagged_pearson(a: np.ndarray, b: np.ndarray, max_lag: int
                    ) -> tuple[float, int]:
    best = -1.0
    best_lag = 0
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            xa = a[: a.size - lag] if lag else a
            xb = b[lag:]
        else:
            xa = a[-lag:]
            xb = b[: b.size + lag]
        if xa.size < 2:
            continue
        try:
            r = abs(pearson(xa, xb))
        except DegenerateInputError:
            continue
        if r > best:
            best, best_lag = r, lag
    return best, best_lag


def select_axes(
    accel: SensorStream,
    gyro: SensorStream,
    noise: SensorStream | None = None,
    max_lag: int = 1,
) -> tuple[int, tuple[int, int], AxisSelectionReport]:
    """Pick the accelerometer axis and the two gyro axes to fuse.

    The accelerometer axis with the highest SNR wins (lowest index on
    ties).  SNR comes from a supplied noise-only capture when available,
    otherwise from a periodogram noise-floor estimate.  Gyro axes are
    ranked by their best absolute Pearson correlation against the chosen
    accelerometer axis over integer lags in [-max_lag, max_lag]; the top
    two are returned in rank order (lower index on ties).  A degenerate
    winning channel raises :class:`DegenerateInputError`.
    """
    if gyro.n_axes < 2:
        raise ValueError("gyro stream needs at least 2 axes to rank")
    if noise is not None and noise.n_axes != accel.n_axes:
        raise ValueError("noise capture must match the accel axis count")
    snrs = []
    for ax in range(accel.n_axes):
        sig = accel.values[ax]
        if noise is not None:
            snrs.append(snr_db(sig, noise.values[ax]))
        else:
            snrs.append(_spectral_snr_db(sig))
    accel_axis = int(np.argmax(snrs))
    chosen = accel.values[accel_axis]
    if float(np.std(chosen)) == 0.0:
        raise DegenerateInputError(
            f"selected accel axis {accel_axis} has zero variance"
        )
    n_common = min(chosen.shape[0], gyro.values.shape[1])
    a = chosen[:n_common]
    scores = []
    lags = []
    for ax in range(gyro.n_axes):
        g = gyro.values[ax][:n_common]
        score, lag = _lagged_pearson(a, g, max_lag)
        scores.append(score)
        lags.append(lag)
    ranking = sorted(range(gyro.n_axes), key=lambda i: (-scores[i], i))
    top = tuple(ranking[:2])
    for ax in top:
        if float(np.std(gyro.values[ax])) == 0.0:
            raise DegenerateInputError(
                f"selected gyro axis {ax} has zero variance"
            )
    report = AxisSelectionReport(
        accel_snr_db=tuple(float(s) for s in snrs),
        gyro_score=tuple(float(s) for s in scores),
        gyro_best_lag=tuple(int(l) for l in lags),
        gyro_ranking=tuple(ranking),
    )
    return accel_axis, (top[0], top[1]), report


def spline_midpoints(odd: SensorStream) -> np.ndarray:
    """Not-a-knot cubic spline evaluated at consecutive-sample midpoints.

    Returns n-1 values for an n-sample single-axis stream.  Exact (to
    rounding) for any cubic polynomial sampled on the stream's grid.
    """
    if odd.n_axes != 1:
        raise ValueError("spline interpolation expects a single-axis stream")
    if odd.n_samples < 4:
        raise ValueError("need at least 4 samples for a not-a-knot spline")
    t = odd.times_s
    spline = CubicSpline(t, odd.values[0], bc_type="not-a-knot")
    mids = (t[:-1] + t[1:]) / 2.0
    return np.asarray(spline(mids), dtype=float)


def _nearest_indices(ts: np.ndarray, queries: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(ts, queries)
    left = np.clip(pos - 1, 0, ts.shape[0] - 1)
    right = np.clip(pos, 0, ts.shape[0] - 1)
    take_right = np.abs(ts[right] - queries) < np.abs(queries - ts[left])
    return np.where(take_right, right, left)


def _midpoint_layout(odd: SensorStream, even_count: int | None
                     ) -> tuple[np.ndarray, int]:
    n_mid = odd.n_samples - 1
    if even_count is not None:
        n_mid = min(n_mid, even_count)
    mid_ts = (odd.timestamps[:n_mid] + odd.timestamps[1:n_mid + 1]) // 2
    return mid_ts, n_mid


def _midpoint_features(
    odd: SensorStream,
    gyro: SensorStream,
    spec: FeatureSpec,
    n_mid: int,
    mid_ts: np.ndarray,
    stage1_pred: np.ndarray | None,
    spline_pred: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    if odd.n_axes != 1:
        raise ValueError("feature building expects a single-axis odd stream")
    axis_idx = spec.gyro_axis_indices()
    for ax in axis_idx:
        if ax >= gyro.n_axes:
            raise ValueError(
                f"feature spec names gyro channel {ax} but the stream has "
                f"{gyro.n_axes}"
            )
    for name, arr in (("stage1_pred", stage1_pred),
                      ("spline_pred", spline_pred)):
        if arr is not None and arr.shape[0] != n_mid:
            raise ValueError(
                f"{name} must hold one value per midpoint ({n_mid}), "
                f"got {arr.shape[0]}"
            )
    mids = np.arange(n_mid)
    valid = np.ones(n_mid, dtype=bool)
    w = spec.accel_window
    if w >= 1:
        valid &= (mids - w >= 0) & (mids + w <= odd.n_samples - 1)
    nearest = _nearest_indices(gyro.timestamps, mid_ts)
    g = spec.gyro_window
    if axis_idx:
        valid &= (nearest - g >= 0) & (nearest + g <= gyro.n_samples - 1)
        if gyro.nominal_rate > 0:
            period_ns = 1e9 / gyro.nominal_rate
        else:
            period_ns = float(np.median(np.diff(gyro.timestamps)))
        offset = np.abs(gyro.timestamps[nearest].astype(float)
                        - mid_ts.astype(float))
        valid &= offset <= period_ns
    kept = np.flatnonzero(valid)
    columns = []
    if w >= 1:
        offsets = np.arange(-w, w + 1)
        columns.append(odd.values[0][kept[:, None] + offsets[None, :]])
    if axis_idx:
        offsets = np.arange(-g, g + 1)
        centers = nearest[kept]
        for ax in axis_idx:
            columns.append(gyro.values[ax][centers[:, None]
                                           + offsets[None, :]])
    if stage1_pred is not None:
        columns.append(stage1_pred[kept][:, None])
    if spline_pred is not None:
        columns.append(spline_pred[kept][:, None])
    X = np.hstack(columns) if columns else np.empty((kept.shape[0], 0))
    return X, kept


def build_features(
    bif: BifurcatedSet,
    spec: FeatureSpec,
    stage1_pred: np.ndarray | None = None,
    spline_pred: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assemble the supervised matrix for gap prediction.

    Row i describes the gap between odd samples i and i+1 whose true value
    is even sample i.  Columns, in order: the odd-accel window (when
    ``accel_window`` >= 1), one window per gyro axis in ``gyro_axes``
    order, then the optional stage-1 and spline columns.  ``stage1_pred``
    and ``spline_pred`` are midpoint-indexed arrays.  Rows whose windows
    run off a stream edge (or whose nearest gyro sample is farther than
    one gyro period from the midpoint) are dropped.

    Returns ``(matrix, targets, midpoint_indices)`` where the indices say
    which midpoints survived.
    """
    if bif.even_accel.n_axes != 1:
        raise ValueError("feature building expects a single-axis even stream")
    mid_ts, n_mid = _midpoint_layout(bif.odd_accel, bif.even_accel.n_samples)
    X, kept = _midpoint_features(bif.odd_accel, bif.gyro, spec, n_mid,
                                 mid_ts, stage1_pred, spline_pred)
    y = bif.even_accel.values[0][kept]
    return X, y, kept


@dataclass
class StagModel:
    """Trained two-stage fusion model plus its preprocessing state."""

    spec: FeatureSpec
    accel_stats: NormStats
    gyro_stats: dict[int, NormStats]
    stage1: gbm.GbmModel
    stage2: gbm.GbmModel


@dataclass
class TrainResult:
    model: StagModel
    reports: tuple[FitReport, FitReport, FitReport]
    cv: gbm.CvReport | None


def _normalized_views(
    odd: SensorStream,
    gyro: SensorStream,
    spec: FeatureSpec,
    accel_stats: NormStats | None = None,
    gyro_stats: dict[int, NormStats] | None = None,
) -> tuple[SensorStream, SensorStream, NormStats, dict[int, NormStats]]:
    odd_nr = noise_reduce(odd, spec.smoothing_window)
    gyro_nr = noise_reduce(gyro, spec.smoothing_window)
    odd_norm, accel_stats = znormalize(odd_nr.values[0], accel_stats)
    gyro_values = gyro_nr.values.copy()
    stats_out: dict[int, NormStats] = {}
    for ax in spec.gyro_axis_indices():
        provided = gyro_stats.get(ax) if gyro_stats is not None else None
        gyro_values[ax], stats_out[ax] = znormalize(gyro_nr.values[ax],
                                                    provided)
    return (odd_nr.with_values(odd_norm), gyro_nr.with_values(gyro_values),
            accel_stats, stats_out)


def _stage_inputs(
    bif: BifurcatedSet, spec: FeatureSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray,
           NormStats, dict[int, NormStats]]:
    """Normalized base matrix, targets, kept indices, spline column, stats."""
    odd_n, gyro_n, accel_stats, gyro_stats = _normalized_views(
        bif.odd_accel, bif.gyro, spec)
    even_nr = noise_reduce(bif.even_accel, spec.smoothing_window)
    even_norm, _ = znormalize(even_nr.values[0], accel_stats)
    norm_bif = BifurcatedSet(odd_accel=odd_n,
                             even_accel=even_nr.with_values(even_norm),
                             gyro=gyro_n)
    spline_col = spline_midpoints(odd_n)
    X, y, kept = build_features(norm_bif, spec)
    return X, y, kept, spline_col, accel_stats, gyro_stats


def _fit_stages(
    X: np.ndarray,
    y: np.ndarray,
    spline_kept: np.ndarray,
    spec: FeatureSpec,
    grid: list[gbm.GbmParams],
    cv_folds: int,
    cv_seed: int,
    train_rows: np.ndarray | None = None,
) -> tuple[gbm.GbmModel, gbm.GbmModel, gbm.CvReport | None,
           np.ndarray, np.ndarray]:
    """Fit both stages; returns models, CV report, and per-row predictions."""
    rows = np.arange(X.shape[0]) if train_rows is None else train_rows
    cv = None
    if len(grid) > 1:
        cv = gbm.grid_search_cv(X[rows], y[rows], grid, k=cv_folds,
                                seed=cv_seed)
        best = cv.best_params
    else:
        best = grid[0]
    stage1 = gbm.fit(X[rows], y[rows], best)
    s1_all = gbm.predict(stage1, X)
    extra = [s1_all[:, None]]
    if spec.include_spline:
        extra.append(spline_kept[:, None])
    X2 = np.hstack([X] + extra)
    stage2 = gbm.fit(X2[rows], y[rows], best)
    s2_all = gbm.predict(stage2, X2)
    return stage1, stage2, cv, s1_all, s2_all


def _stage_reports(
    y: np.ndarray,
    spline_pred: np.ndarray,
    s1_pred: np.ndarray,
    s2_pred: np.ndarray,
    rows: np.ndarray,
    std: float,
) -> tuple[FitReport, FitReport, FitReport]:
    # MSE is reported in sensor units (normalization undone by std^2).
    out = []
    for stage, pred in ((STAGE_SPLINE, spline_pred), (STAGE_GBM, s1_pred),
                        (STAGE_COMBINED, s2_pred)):
        out.append(FitReport(
            stage=stage,
            r_squared=gbm.r_squared(y[rows], pred[rows]),
            mse=gbm.mean_squared_error(y[rows], pred[rows]) * std**2,
            n_rows=int(rows.shape[0]),
        ))
    return tuple(out)


def train_stag(
    bif: BifurcatedSet,
    spec: FeatureSpec | None = None,
    grid: list[gbm.GbmParams] | None = None,
    cv_folds: int = 5,
    cv_seed: int = 0,
) -> TrainResult:
    """Train the two-stage fusion model on a bifurcated capture.

    Stage 1 hyperparameters come from a cross-validated grid search (the
    search is skipped when the grid has a single point); stage 2 reuses
    the winning parameters.  Returns the model plus training-set fit
    reports for the spline baseline, stage 1, and the combined model.
    """
    if spec is None:
        spec = FeatureSpec()
    if grid is None:
        grid = [gbm.GbmParams()]
    X, y, kept, spline_col, accel_stats, gyro_stats = _stage_inputs(bif, spec)
    spline_kept = spline_col[kept]
    stage1, stage2, cv, s1, s2 = _fit_stages(
        X, y, spline_kept, spec, grid, cv_folds, cv_seed)
    rows = np.arange(X.shape[0])
    reports = _stage_reports(y, spline_kept, s1, s2, rows, accel_stats.std)
    model = StagModel(spec=spec, accel_stats=accel_stats,
                      gyro_stats=gyro_stats, stage1=stage1, stage2=stage2)
    return TrainResult(model=model, reports=reports, cv=cv)


@dataclass
class HoldoutReport:
    """Fit reports per split after training on the train rows only."""

    model: StagModel
    reports: dict[str, tuple[FitReport, FitReport, FitReport]]
    split_sizes: tuple[int, int, int]
    cv: gbm.CvReport | None


def holdout_report(
    bif: BifurcatedSet,
    spec: FeatureSpec | None = None,
    grid: list[gbm.GbmParams] | None = None,
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
    cv_folds: int = 5,
) -> HoldoutReport:
    """Split feature rows train/validation/test, fit on train, report all.

    Rows are shuffled with ``seed`` and apportioned by ``ratios``; the
    grid search (when the grid has several points) and both stages see
    only the training rows, so the validation and test numbers measure
    held-out samples.
    """
    if spec is None:
        spec = FeatureSpec()
    if grid is None:
        grid = [gbm.GbmParams()]
    X, y, kept, spline_col, accel_stats, _gyro_stats = _stage_inputs(bif, spec)
    spline_kept = spline_col[kept]
    split = split_dataset(list(range(X.shape[0])), ratios=ratios, seed=seed)
    subsets = {
        "train": np.array(split.train, dtype=int),
        "validation": np.array(split.validation, dtype=int),
        "test": np.array(split.test, dtype=int),
    }
    stage1, stage2, cv, s1, s2 = _fit_stages(
        X, y, spline_kept, spec, grid, cv_folds, cv_seed=seed,
        train_rows=subsets["train"])
    reports = {
        name: _stage_reports(y, spline_kept, s1, s2, rows, accel_stats.std)
        for name, rows in subsets.items() if rows.size
    }
    model = StagModel(spec=spec, accel_stats=accel_stats,
                      gyro_stats=_gyro_stats, stage1=stage1, stage2=stage2)
    return HoldoutReport(model=model, reports=reports,
                         split_sizes=split.sizes(), cv=cv)


def evaluate_model(model: StagModel, bif: BifurcatedSet
                   ) -> tuple[FitReport, FitReport, FitReport]:
    """Score a trained model on a fresh bifurcated capture (no retraining).

    Preprocessing reuses the model's frozen normalization statistics, so
    the reported numbers measure generalization to the new capture.
    """
    spec = model.spec
    odd_n, gyro_n, _, _ = _normalized_views(
        bif.odd_accel, bif.gyro, spec, model.accel_stats, model.gyro_stats)
    even_nr = noise_reduce(bif.even_accel, spec.smoothing_window)
    even_norm, _ = znormalize(even_nr.values[0], model.accel_stats)
    mid_ts, n_mid = _midpoint_layout(odd_n, even_nr.n_samples)
    spline_col = spline_midpoints(odd_n)[:n_mid]
    X, kept = _midpoint_features(odd_n, gyro_n, spec, n_mid, mid_ts,
                                 None, None)
    y = even_norm[kept]
    s1 = gbm.predict(model.stage1, X)
    extra = [s1[:, None]]
    if spec.include_spline:
        extra.append(spline_col[kept][:, None])
    s2 = gbm.predict(model.stage2, np.hstack([X] + extra))
    rows = np.arange(y.shape[0])
    return _stage_reports(y, spline_col[kept], s1, s2, rows,
                          model.accel_stats.std)


def upsample(model: StagModel, odd: SensorStream, gyro: SensorStream
             ) -> SensorStream:
    """Reconstruct the full-rate accelerometer stream.

    Predicts every gap between consecutive odd samples with the combined
    model, falls back to the spline for edge gaps whose feature windows
    run off the stream, restores the moving-average baseline, and
    interleaves predictions with the original samples.  Output rate is
    twice the input rate.  Gyro coverage gaps in the interior raise
    ``ValueError`` listing the missing midpoints.
    """
    if odd.n_axes != 1:
        raise ValueError("upsampling expects a single-axis accel stream")
    spec = model.spec
    odd_n, gyro_n, _, _ = _normalized_views(
        odd, gyro, spec, model.accel_stats, model.gyro_stats)
    mid_ts, n_mid = _midpoint_layout(odd_n, None)
    spline_col = spline_midpoints(odd_n)
    X, kept = _midpoint_features(odd_n, gyro_n, spec, n_mid, mid_ts,
                                 None, None)
    if kept.size == 0:
        raise ValueError("gyro stream does not cover any gap midpoints")
    interior = np.arange(kept[0], kept[-1] + 1)
    missing = np.setdiff1d(interior, kept)
    if missing.size:
        missing_ts = ", ".join(str(int(t)) for t in mid_ts[missing][:10])
        raise ValueError(
            f"gyro coverage gaps at {missing.size} interior midpoints "
            f"(timestamps {missing_ts})"
        )
    s1 = gbm.predict(model.stage1, X)
    extra = [s1[:, None]]
    if spec.include_spline:
        extra.append(spline_col[kept][:, None])
    s2 = gbm.predict(model.stage2, np.hstack([X] + extra))
    preds_norm = spline_col.copy()
    preds_norm[kept] = s2
    preds = denormalize(preds_norm, model.accel_stats)
    # Restore the baseline the preprocessing removed.
    baseline = odd.values[0] - noise_reduce(odd, spec.smoothing_window).values[0]
    mid_baseline = np.interp(mid_ts.astype(float) * 1e-9, odd.times_s,
                             baseline)
    even = SensorStream("accel", mid_ts, preds + mid_baseline,
                        odd.nominal_rate)
    return interleave(odd, even)


def _format_stats(stats: NormStats) -> str:
    return f"{stats.mean!r} {stats.std!r}"


def save_stag_model(model: StagModel, path: str | Path) -> None:
    """Write the fusion model (both stages plus preprocessing) as text."""
    spec = model.spec
    lines = [
        _MODEL_HEADER,
        "featurespec "
        f"accel_window={spec.accel_window} gyro_window={spec.gyro_window} "
        f"gyro_axes={','.join(spec.gyro_axes)} "
        f"include_spline={int(spec.include_spline)} "
        f"smoothing_window={spec.smoothing_window}",
        f"norm accel {_format_stats(model.accel_stats)}",
    ]
    for ax in sorted(model.gyro_stats):
        lines.append(f"norm gyro_{ax} {_format_stats(model.gyro_stats[ax])}")
    lines.append("stage1")
    lines.append(gbm.to_text(model.stage1).rstrip("\n"))
    lines.append("stage2")
    lines.append(gbm.to_text(model.stage2).rstrip("\n"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_stag_model(path: str | Path) -> StagModel:
    """Read a model written by :func:`save_stag_model`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != _MODEL_HEADER:
        raise ValueError(
            f"unsupported model format; expected header {_MODEL_HEADER!r}"
        )
    if len(lines) < 2 or not lines[1].startswith("featurespec "):
        raise ValueError("missing featurespec line")
    kv = dict(item.split("=", 1) for item in lines[1].split()[1:])
    axes = tuple(a for a in kv["gyro_axes"].split(",") if a)
    spec = FeatureSpec(
        accel_window=int(kv["accel_window"]),
        gyro_window=int(kv["gyro_window"]),
        gyro_axes=axes,
        include_spline=bool(int(kv["include_spline"])),
        smoothing_window=int(kv["smoothing_window"]),
    )
    accel_stats = None
    gyro_stats: dict[int, NormStats] = {}
    pos = 2
    while pos < len(lines) and lines[pos].startswith("norm "):
        _, channel, mean, std = lines[pos].split()
        stats = NormStats(mean=float(mean), std=float(std))
        if channel == "accel":
            accel_stats = stats
        elif channel.startswith("gyro_"):
            gyro_stats[int(channel[5:])] = stats
        else:
            raise ValueError(f"unknown normalization channel {channel!r}")
        pos += 1
    if accel_stats is None:
        raise ValueError("missing accel normalization stats")
    if pos >= len(lines) or lines[pos] != "stage1":
        raise ValueError("missing stage1 section")
    try:
        stage2_at = lines.index("stage2", pos + 1)
    except ValueError:
        raise ValueError("missing stage2 section") from None
    stage1 = gbm.from_text("\n".join(lines[pos + 1:stage2_at]) + "\n")
    stage2 = gbm.from_text("\n".join(lines[stage2_at + 1:]) + "\n")
    return StagModel(spec=spec, accel_stats=accel_stats,
                     gyro_stats=gyro_stats, stage1=stage1, stage2=stage2)
