"""Command-line front end for the simulate / train / upsample / eval flow.

Subcommands:

* ``simulate``: synthesize a capture, write accel/gyro CSVs, and print the
  gyro deviation-from-center percentage.
* ``train``: fit the two-stage fusion model on a full-rate capture and
  save it.
* ``upsample``: double a rate-capped stream's rate with a saved model.
* ``eval``: score a saved model on a fresh capture, or score transcript
  and entity files.
* ``metrics``: score transcript and entity files only.

Settings come from built-in defaults, overridden by a flat ``key = value``
config file (``#`` starts a comment), overridden by command-line flags.
Exit codes: 0 success, 2 bad input or unreadable/unwritable files, 1
internal failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import fusion, gbm, metrics
from .ingest import (bifurcate, downsample, read_csv, read_entities,
                     read_transcripts, write_csv)
from .sensorsim import (ChannelModel, deviation_from_center,
                        simulate_scenario, synth_source)

_AXIS_POSITIONS = {"x": 0, "y": 1, "z": 2}


@dataclass
class RunConfig:
    """Every tunable setting, with its default value."""

    seed: int = 42
    out: str = "out"
    # simulate
    scenario: int = 3
    rate: float = 200.0
    duration: float = 4.0
    n_components: int = 3
    noise_floor: float = 0.0
    jitter_std: float = 0.0
    accel_z_gain: float = 1.0
    gyro_x_gain: float = 1.0
    gyro_y_gain: float = 1.0
    gyro_coupling: str = "derivative"
    accel_snr_db: float = float("inf")
    gyro_snr_db: float = float("inf")
    cross_axis_leak: float = 0.0
    # features
    accel_axis: str = "auto"
    accel_window: int = 2
    gyro_window: int = 1
    gyro_axes: str = "x,y"
    include_spline: bool = True
    smoothing_window: int = 51
    # boosting
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    max_depth: int = 6
    min_samples_leaf: int = 20
    n_bins: int = 255
    grid_learning_rate: str = ""
    grid_max_leaves: str = ""
    cv_folds: int = 5
    # dataset handling
    capture_rate: float = 400.0
    train_ratio: float = 0.7
    validation_ratio: float = 0.15
    test_ratio: float = 0.15
    # file inputs
    accel_csv: str = ""
    gyro_csv: str = ""
    model_path: str = ""
    transcripts: str = ""
    ref_entities: str = ""
    hyp_entities: str = ""


def _coerce(name: str, raw: str, default) -> object:
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {name!r} expects a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValueError(
            f"config key {name!r} expects a {type(default).__name__}, "
            f"got {raw!r}"
        ) from None
    return raw


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> RunConfig:
    """Defaults, then config-file values, then explicit overrides."""
    cfg = RunConfig()
    defaults = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    if path:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(
                    f"{path}:{lineno}: expected 'key = value', "
                    f"got {stripped!r}"
                )
            key, value = (part.strip() for part in stripped.split("=", 1))
            if key not in defaults:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, value, defaults[key]))
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _float_list(raw: str) -> list[float]:
    return [float(part) for part in raw.split(",") if part.strip()]


def _int_list(raw: str) -> list[int]:
    return [int(part) for part in raw.split(",") if part.strip()]


def _channel_model(cfg: RunConfig) -> ChannelModel:
    return ChannelModel(
        accel_z_gain=cfg.accel_z_gain,
        gyro_x_gain=cfg.gyro_x_gain,
        gyro_y_gain=cfg.gyro_y_gain,
        gyro_coupling=cfg.gyro_coupling,
        accel_snr_db=cfg.accel_snr_db,
        gyro_snr_db=cfg.gyro_snr_db,
        cross_axis_leak=cfg.cross_axis_leak,
    )


def _feature_spec(cfg: RunConfig,
                  gyro_axes: tuple[str, ...] | None = None) -> fusion.FeatureSpec:
    if gyro_axes is None:
        gyro_axes = tuple(a.strip() for a in cfg.gyro_axes.split(",")
                          if a.strip())
    return fusion.FeatureSpec(
        accel_window=cfg.accel_window,
        gyro_window=cfg.gyro_window,
        gyro_axes=gyro_axes,
        include_spline=cfg.include_spline,
        smoothing_window=cfg.smoothing_window,
    )


def _grid(cfg: RunConfig) -> list[gbm.GbmParams]:
    base = gbm.GbmParams(
        n_rounds=cfg.n_rounds,
        learning_rate=cfg.learning_rate,
        max_leaves=cfg.max_leaves,
        max_depth=cfg.max_depth,
        min_samples_leaf=cfg.min_samples_leaf,
        n_bins=cfg.n_bins,
        seed=cfg.seed,
    )
    axes = {}
    if cfg.grid_learning_rate:
        axes["learning_rate"] = _float_list(cfg.grid_learning_rate)
    if cfg.grid_max_leaves:
        axes["max_leaves"] = _int_list(cfg.grid_max_leaves)
    return gbm.param_grid(base, **axes)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _prepare_capture(cfg: RunConfig):
    """Read, rate-limit, and axis-select a training/eval capture."""
    if not cfg.accel_csv or not cfg.gyro_csv:
        raise ValueError("this command needs accel_csv and gyro_csv inputs")
    accel = read_csv(cfg.accel_csv)
    gyro = read_csv(cfg.gyro_csv)
    if accel.nominal_rate > cfg.capture_rate:
        accel = downsample(accel, cfg.capture_rate)
    if gyro.nominal_rate > cfg.capture_rate:
        gyro = downsample(gyro, cfg.capture_rate)
    gyro_axes = tuple(a.strip() for a in cfg.gyro_axes.split(",")
                      if a.strip())
    if accel.n_axes > 1:
        if cfg.accel_axis == "auto":
            # Auto mode picks the accel axis by SNR and the gyro axes by
            # lagged correlation; an explicit accel_axis keeps the
            # configured gyro_axes instead.
            names = ("x", "y", "z")
            axis, gyro_top, _ = fusion.select_axes(accel, gyro)
            gyro_axes = tuple(names[i] for i in gyro_top)
        elif cfg.accel_axis in _AXIS_POSITIONS:
            axis = _AXIS_POSITIONS[cfg.accel_axis]
        else:
            raise ValueError(
                f"accel_axis must be auto, x, y, or z, got {cfg.accel_axis!r}"
            )
        accel = accel.take_axis(axis)
    return accel, gyro, gyro_axes


def cmd_simulate(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    src = synth_source(cfg.seed, cfg.duration, cfg.n_components,
                       cfg.noise_floor)
    accel, companion = simulate_scenario(cfg.scenario, src,
                                         _channel_model(cfg), cfg.rate,
                                         cfg.jitter_std)
    write_csv(accel, out / "accel.csv")
    write_csv(companion, out / "gyro.csv")
    deviation = deviation_from_center(accel, companion)
    line = f"deviation_pct={deviation:.4f}"
    (out / "deviation.txt").write_text(line + "\n", encoding="utf-8")
    print(line)


def cmd_train(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    accel, gyro, gyro_axes = _prepare_capture(cfg)
    bif = bifurcate(accel, gyro)
    spec = _feature_spec(cfg, gyro_axes)
    result = fusion.train_stag(bif, spec, _grid(cfg), cv_folds=cfg.cv_folds,
                               cv_seed=cfg.seed)
    model_path = out / "stag_model.txt"
    fusion.save_stag_model(result.model, model_path)
    lines = [fusion.format_fit_report(r) for r in result.reports]
    (out / "train_report.txt").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    print(f"model={model_path}")
    for line in lines:
        print(line)


def cmd_upsample(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    if not cfg.model_path:
        raise ValueError("upsample needs a model_path")
    if not cfg.accel_csv or not cfg.gyro_csv:
        raise ValueError("upsample needs accel_csv and gyro_csv inputs")
    model = fusion.load_stag_model(cfg.model_path)
    odd = read_csv(cfg.accel_csv)
    gyro = read_csv(cfg.gyro_csv)
    if odd.n_axes > 1:
        if cfg.accel_axis in _AXIS_POSITIONS:
            odd = odd.take_axis(_AXIS_POSITIONS[cfg.accel_axis])
        elif cfg.accel_axis == "auto":
            axis, _, _ = fusion.select_axes(odd, gyro)
            odd = odd.take_axis(axis)
        else:
            raise ValueError(
                f"accel_axis must be auto, x, y, or z, got {cfg.accel_axis!r}"
            )
    reconstructed = fusion.upsample(model, odd, gyro)
    path = out / "reconstructed.csv"
    write_csv(reconstructed, path)
    print(f"reconstructed={path}")
    print(f"n_samples={reconstructed.n_samples} "
          f"rate_hz={reconstructed.nominal_rate:g}")


def _score_corpus(cfg: RunConfig, out: Path) -> None:
    if not (cfg.transcripts and cfg.ref_entities and cfg.hyp_entities):
        raise ValueError(
            "scoring needs transcripts, ref_entities, and hyp_entities"
        )
    pairs = read_transcripts(cfg.transcripts)
    refs = read_entities(cfg.ref_entities)
    hyps = read_entities(cfg.hyp_entities)
    report = metrics.corpus_report(pairs, refs, hyps)
    metrics.write_report(report, out / "metrics_report.txt",
                         out / "metrics_sentences.tsv")
    print(metrics.format_report(report), end="")


def cmd_eval(cfg: RunConfig) -> None:
    out = _out_dir(cfg)
    if cfg.transcripts:
        _score_corpus(cfg, out)
        return
    if not cfg.model_path:
        raise ValueError(
            "eval needs either transcript/entity files or a model_path "
            "with accel_csv and gyro_csv"
        )
    model = fusion.load_stag_model(cfg.model_path)
    accel, gyro, _ = _prepare_capture(cfg)
    bif = bifurcate(accel, gyro)
    reports = fusion.evaluate_model(model, bif)
    lines = [fusion.format_fit_report(r) for r in reports]
    (out / "eval_report.txt").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
    for line in lines:
        print(line)


def cmd_metrics(cfg: RunConfig) -> None:
    _score_corpus(cfg, _out_dir(cfg))


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "upsample": cmd_upsample,
    "eval": cmd_eval,
    "metrics": cmd_metrics,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stag",
        description="Sensor-fusion upsampling of rate-capped accelerometer "
                    "streams",
    )
    parser.add_argument("--config", help="flat key = value settings file")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a capture")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3))
    p.add_argument("--rate", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--jitter-std", dest="jitter_std", type=float)

    p = sub.add_parser("train", help="fit the fusion model on a capture")
    p.add_argument("--accel", dest="accel_csv")
    p.add_argument("--gyro", dest="gyro_csv")

    p = sub.add_parser("upsample", help="double a stream's rate")
    p.add_argument("--model", dest="model_path")
    p.add_argument("--accel", dest="accel_csv")
    p.add_argument("--gyro", dest="gyro_csv")

    p = sub.add_parser("eval", help="score a model or transcript files")
    p.add_argument("--model", dest="model_path")
    p.add_argument("--accel", dest="accel_csv")
    p.add_argument("--gyro", dest="gyro_csv")
    p.add_argument("--transcripts")
    p.add_argument("--ref-entities", dest="ref_entities")
    p.add_argument("--hyp-entities", dest="hyp_entities")

    p = sub.add_parser("metrics", help="score transcript files")
    p.add_argument("--transcripts")
    p.add_argument("--ref-entities", dest="ref_entities")
    p.add_argument("--hyp-entities", dest="hyp_entities")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        cfg = load_config(config_path, overrides=args)
        _COMMANDS[command](cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
