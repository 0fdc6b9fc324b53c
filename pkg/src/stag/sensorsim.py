"""Synthetic IMU capture of a speech-band vibration source.

A :class:`SourceSignal` is a deterministic multi-tone waveform whose
components sit in the adult speech fundamental band.  :func:`sample_stream`
pushes it through a :class:`ChannelModel` (per-axis gains, copy or
derivative gyroscope coupling, per-sensor SNR) and samples it on a jittered
integer-nanosecond timebase described by a :class:`MisalignmentProfile`.

:func:`simulate_scenario` produces the three timing-alignment cases used
throughout the pipeline:

1. one physical accelerometer read out twice (identical streams),
2. an accelerometer and a gyroscope sharing one timebase (aligned pair),
3. the same pair with the gyroscope offset by half a sample period
   (2.5 ms at 200 Hz), the misalignment the fusion stage exploits.

:func:`deviation_from_center` quantifies case 3: 0% means every gyroscope
sample falls exactly midway between accelerometer samples, 100% means the
timestamps coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEECH_BAND_HZ = (85.0, 255.0)
SOURCE_BAND_HZ = (85.0, 200.0)

SENSOR_KINDS = ("accel", "gyro", "mag")
COUPLING_MODES = ("copy", "derivative")

_KIND_CODES = {"accel": 1, "gyro": 2, "mag": 3}
_NOISE_SALT = 101
_JITTER_SALT = 202
_AXIS_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class SourceSignal:
    """Deterministic multi-tone vibration source.

    ``components`` holds ``(frequency_hz, amplitude, phase_rad)`` triples;
    the waveform is ``sum(a * sin(2*pi*f*t + phase))``.  ``noise_floor`` is
    the RMS of source-intrinsic white noise added at sampling time.
    """

    seed: int
    duration: float
    components: tuple[tuple[float, float, float], ...]
    noise_floor: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.duration) or self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.components:
            raise ValueError("source needs at least one component")
        for freq, amp, _ in self.components:
            if not 0.0 < freq <= SOURCE_BAND_HZ[1]:
                raise ValueError(
                    f"component frequency {freq} Hz outside (0, {SOURCE_BAND_HZ[1]}]"
                )
            if not math.isfinite(amp):
                raise ValueError("component amplitude must be finite")
        if not any(
            SPEECH_BAND_HZ[0] <= freq <= SPEECH_BAND_HZ[1]
            for freq, _, _ in self.components
        ):
            raise ValueError(
                f"at least one component must lie in {SPEECH_BAND_HZ} Hz"
            )
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be >= 0")

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Noise-free source value at times ``t`` (seconds)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for freq, amp, phase in self.components:
            out += amp * np.sin(2.0 * math.pi * freq * t + phase)
        return out

    def derivative(self, t: np.ndarray) -> np.ndarray:
        """Analytic time derivative of the source at times ``t`` (seconds)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for freq, amp, phase in self.components:
            w = 2.0 * math.pi * freq
            out += amp * w * np.cos(w * t + phase)
        return out


def synth_source(
    seed: int,
    duration: float,
    n_components: int,
    noise_floor: float = 0.0,
) -> SourceSignal:
    """Draw a random multi-tone source, bit-reproducible for a given seed.

    Component frequencies are uniform over the speech fundamental band
    capped at 200 Hz, amplitudes over [0.5, 1.0], phases over [0, 2*pi).
    """
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(SOURCE_BAND_HZ[0], SOURCE_BAND_HZ[1], n_components)
    amps = rng.uniform(0.5, 1.0, n_components)
    phases = rng.uniform(0.0, 2.0 * math.pi, n_components)
    components = tuple(
        (float(f), float(a), float(p)) for f, a, p in zip(freqs, amps, phases)
    )
    return SourceSignal(seed=seed, duration=duration, components=components,
                        noise_floor=noise_floor)


@dataclass(frozen=True)
class ChannelModel:
    """Per-axis response of one simulated IMU.

    The accelerometer z axis carries the source scaled by ``accel_z_gain``;
    its x and y axes see only ``cross_axis_leak`` times that signal.  The
    gyroscope x and y axes carry the coupled waveform (the source itself for
    ``copy`` coupling, its time derivative for ``derivative`` coupling)
    scaled by their gains, and gyro z sees only leakage.  Additive white
    noise per sensor is sized so the strongest axis of that sensor meets the
    stated SNR.
    """

    accel_z_gain: float = 1.0
    gyro_x_gain: float = 1.0
    gyro_y_gain: float = 1.0
    gyro_coupling: str = "derivative"
    accel_snr_db: float = math.inf
    gyro_snr_db: float = math.inf
    cross_axis_leak: float = 0.0

    def __post_init__(self) -> None:
        if self.gyro_coupling not in COUPLING_MODES:
            raise ValueError(
                f"gyro_coupling must be one of {COUPLING_MODES}, "
                f"got {self.gyro_coupling!r}"
            )
        for name in ("accel_z_gain", "gyro_x_gain", "gyro_y_gain"):
            val = getattr(self, name)
            if not math.isfinite(val) or val == 0.0:
                raise ValueError(f"{name} must be finite and nonzero")
        if not 0.0 <= self.cross_axis_leak < 1.0:
            raise ValueError("cross_axis_leak must lie in [0, 1)")
        if self.accel_snr_db < self.gyro_snr_db:
            raise ValueError(
                "accel_snr_db must be >= gyro_snr_db "
                "(the rate-capped accelerometer is the cleaner channel)"
            )


@dataclass(frozen=True)
class MisalignmentProfile:
    """Timing law for one stream: phase offset plus Gaussian jitter.

    ``phase_fraction`` shifts every ideal sample instant by that fraction of
    a period; ``jitter_std`` (seconds) perturbs each instant independently.
    """

    phase_fraction: float = 0.0
    jitter_std: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.phase_fraction < 1.0:
            raise ValueError("phase_fraction must lie in [0, 1)")
        if self.jitter_std < 0.0:
            raise ValueError("jitter_std must be >= 0")


@dataclass(eq=False)
class SensorStream:
    """One sensor's capture: int64 nanosecond timestamps plus channel values.

    ``values`` has shape ``(n_axes, n_samples)`` with axes ordered x, y, z.
    """

    sensor_kind: str
    timestamps: np.ndarray
    values: np.ndarray
    nominal_rate: float

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.sensor_kind not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.sensor_kind!r}")
        if self.values.shape[1] != self.timestamps.shape[0]:
            raise ValueError(
                f"{self.values.shape[1]} value columns for "
                f"{self.timestamps.shape[0]} timestamps"
            )
        if not 1 <= self.values.shape[0] <= 3:
            raise ValueError("streams carry between 1 and 3 axes")
        if self.timestamps.size > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.nominal_rate < 0:
            raise ValueError("nominal_rate must be >= 0")

    @property
    def n_samples(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def n_axes(self) -> int:
        return int(self.values.shape[0])

    @property
    def times_s(self) -> np.ndarray:
        """Timestamps in float seconds."""
        return self.timestamps.astype(float) * 1e-9

    def axis(self, index: int) -> np.ndarray:
        return self.values[index]

    def take(self, sample_indices: np.ndarray) -> "SensorStream":
        """New stream keeping the given sample positions (same axes)."""
        idx = np.asarray(sample_indices)
        return SensorStream(self.sensor_kind, self.timestamps[idx],
                            self.values[:, idx], self.nominal_rate)

    def take_axis(self, axis: int) -> "SensorStream":
        """New single-axis stream keeping the given channel."""
        if not 0 <= axis < self.n_axes:
            raise ValueError(f"axis {axis} out of range for "
                             f"{self.n_axes}-axis stream")
        return SensorStream(self.sensor_kind, self.timestamps.copy(),
                            self.values[axis:axis + 1].copy(),
                            self.nominal_rate)

    def with_values(self, values: np.ndarray) -> "SensorStream":
        return SensorStream(self.sensor_kind, self.timestamps.copy(),
                            values, self.nominal_rate)

    def equals(self, other: "SensorStream") -> bool:
        """Exact equality of kind, timestamps, values, and nominal rate."""
        return (
            self.sensor_kind == other.sensor_kind
            and self.nominal_rate == other.nominal_rate
            and self.timestamps.shape == other.timestamps.shape
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.timestamps, other.timestamps))
            and bool(np.array_equal(self.values, other.values))
        )


def _parse_kind(kind: str) -> tuple[str, list[int]]:
    # "gyro" -> all three axes; "gyro_x" -> just that axis
    base, _, axis = kind.partition("_")
    if base not in ("accel", "gyro"):
        raise ValueError(f"cannot simulate sensor kind {kind!r}")
    if not axis:
        return base, [0, 1, 2]
    if axis not in _AXIS_NAMES:
        raise ValueError(f"unknown axis {axis!r} in {kind!r}")
    return base, [_AXIS_NAMES.index(axis)]


def _timestamps_ns(
    n: int,
    rate: float,
    profile: MisalignmentProfile,
    rng: np.random.Generator,
) -> np.ndarray:
    period_ns = 1e9 / rate
    base = np.round((np.arange(n) + profile.phase_fraction) * period_ns)
    if profile.jitter_std == 0.0:
        return base.astype(np.int64)
    jitter = rng.normal(0.0, profile.jitter_std * 1e9, n)
    ts = np.round(base + jitter).astype(np.int64)
    # Redraw jitter wherever it broke monotonicity; deterministic because the
    # generator state advances the same way for a given seed.
    for _ in range(1000):
        bad = np.flatnonzero(np.diff(ts) <= 0)
        if bad.size == 0:
            return ts
        redo = np.unique(np.concatenate([bad, bad + 1]))
        jitter[redo] = rng.normal(0.0, profile.jitter_std * 1e9, redo.size)
        ts = np.round(base + jitter).astype(np.int64)
    raise ValueError(
        "jitter_std too large relative to the sample period to keep "
        "timestamps strictly increasing"
    )


def _clean_axes(
    src: SourceSignal, ch: ChannelModel, base: str, t_s: np.ndarray
) -> np.ndarray:
    if base == "accel":
        z = ch.accel_z_gain * src.evaluate(t_s)
        leak = ch.cross_axis_leak * z
        return np.stack([leak, leak.copy(), z])
    coupled = src.evaluate(t_s) if ch.gyro_coupling == "copy" else src.derivative(t_s)
    x = ch.gyro_x_gain * coupled
    y = ch.gyro_y_gain * coupled
    ref_gain = max(abs(ch.gyro_x_gain), abs(ch.gyro_y_gain))
    z = ch.cross_axis_leak * ref_gain * coupled
    return np.stack([x, y, z])


def _noise_sigma(clean: np.ndarray, snr_db: float) -> float:
    # Reference the strongest clean axis so the stated SNR is met there.
    if math.isinf(snr_db):
        return 0.0
    rms = math.sqrt(float(np.max(np.mean(clean**2, axis=1))))
    return rms * 10.0 ** (-snr_db / 20.0)


def _values_at(
    src: SourceSignal,
    ch: ChannelModel,
    base: str,
    axis_idx: list[int],
    t_s: np.ndarray,
) -> np.ndarray:
    clean = _clean_axes(src, ch, base, t_s)
    snr_db = ch.accel_snr_db if base == "accel" else ch.gyro_snr_db
    sigma = _noise_sigma(clean, snr_db)
    n = t_s.shape[0]
    out = np.empty((len(axis_idx), n))
    for row, ax in enumerate(axis_idx):
        rng = np.random.default_rng(
            [src.seed, _KIND_CODES[base], ax, _NOISE_SALT]
        )
        noise = rng.normal(0.0, sigma, n) if sigma > 0 else 0.0
        floor = (
            rng.normal(0.0, src.noise_floor, n) if src.noise_floor > 0 else 0.0
        )
        out[row] = clean[ax] + noise + floor
    return out


def sample_stream(
    src: SourceSignal,
    ch: ChannelModel,
    kind: str,
    rate: float,
    profile: MisalignmentProfile | None = None,
    timestamps_ns: np.ndarray | None = None,
) -> SensorStream:
    """Sample the source through one sensor channel.

    ``kind`` is a sensor kind with optional axis suffix: ``"accel"``,
    ``"gyro"``, ``"accel_z"``, ``"gyro_x"``, ...  Bare kinds produce
    tri-axis streams.  ``timestamps_ns`` overrides the generated timebase
    (used to give two sensors one shared clock); otherwise timestamps
    follow ``profile`` at ``rate``.

    Identical arguments always reproduce the identical stream: the noise
    and jitter draws are seeded from the source seed and the sensor kind.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    base, axis_idx = _parse_kind(kind)
    if profile is None:
        profile = MisalignmentProfile()
    if timestamps_ns is None:
        n = int(math.floor(src.duration * rate))
        if n < 2:
            raise ValueError("duration * rate must give at least 2 samples")
        jitter_rng = np.random.default_rng(
            [src.seed, _KIND_CODES[base], _JITTER_SALT]
        )
        ts = _timestamps_ns(n, rate, profile, jitter_rng)
    else:
        ts = np.asarray(timestamps_ns, dtype=np.int64)
        if ts.size < 2:
            raise ValueError("need at least 2 timestamps")
    values = _values_at(src, ch, base, axis_idx, ts.astype(float) * 1e-9)
    return SensorStream(base, ts, values, float(rate))


def simulate_scenario(
    scenario: int,
    src: SourceSignal,
    ch: ChannelModel,
    rate: float,
    jitter_std: float = 0.0,
) -> tuple[SensorStream, SensorStream]:
    """Produce an (accelerometer, companion) pair for one alignment case.

    Scenario 1 returns the same accelerometer capture twice (one physical
    sensor read through two registrations).  Scenario 2 returns an
    accelerometer and gyroscope sharing one jittered timebase.  Scenario 3
    offsets the gyroscope timebase by half a period and jitters it
    independently.
    """
    if scenario not in (1, 2, 3):
        raise ValueError(f"scenario must be 1, 2, or 3, got {scenario}")
    accel_profile = MisalignmentProfile(0.0, jitter_std)
    accel = sample_stream(src, ch, "accel", rate, accel_profile)
    if scenario == 1:
        twin = SensorStream("accel", accel.timestamps.copy(),
                            accel.values.copy(), accel.nominal_rate)
        return accel, twin
    if scenario == 2:
        gyro = sample_stream(src, ch, "gyro", rate,
                             timestamps_ns=accel.timestamps)
        return accel, gyro
    gyro_profile = MisalignmentProfile(0.5, jitter_std)
    gyro = sample_stream(src, ch, "gyro", rate, gyro_profile)
    return accel, gyro


def deviation_from_center(accel: SensorStream, gyro: SensorStream) -> float:
    """Mean deviation of gyro sample instants from interval midpoints, in %.

    Each gyro timestamp strictly inside an accelerometer interval
    ``(a_i, a_{i+1})`` contributes ``|phase - 0.5| / 0.5 * 100`` where
    ``phase`` is its fractional position in the interval.  A gyro timestamp
    equal to an accelerometer timestamp contributes 100.  Samples outside
    the accelerometer range are ignored; if nothing overlaps, raises
    ``ValueError``.  The result is invariant under a common time shift.
    """
    if accel.n_samples < 2:
        raise ValueError("need at least 2 accelerometer samples")
    a = accel.timestamps
    g = gyro.timestamps
    idx = np.searchsorted(a, g, side="left")
    in_range = idx < a.shape[0]
    equal = np.zeros(g.shape[0], dtype=bool)
    equal[in_range] = a[idx[in_range]] == g[in_range]
    interior = ~equal & (idx > 0) & in_range
    contributions = []
    if np.any(equal):
        contributions.append(np.full(int(np.count_nonzero(equal)), 100.0))
    if np.any(interior):
        lo = a[idx[interior] - 1].astype(float)
        hi = a[idx[interior]].astype(float)
        phase = (g[interior].astype(float) - lo) / (hi - lo)
        contributions.append(np.abs(phase - 0.5) / 0.5 * 100.0)
    if not contributions:
        raise ValueError(
            "no gyro samples fall within the accelerometer time range"
        )
    return float(np.mean(np.concatenate(contributions)))
