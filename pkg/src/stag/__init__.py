"""Sensor-fusion upsampling of rate-capped accelerometer streams.

The pipeline simulates temporally misaligned IMU captures of a speech-band
vibration source, doubles the accelerometer's effective sample rate by
fusing cubic-spline interpolation with boosted-tree predictions driven by
a misaligned gyroscope, and scores downstream transcripts with WER / SER /
SEER metrics.
"""

from .sensorsim import (
    ChannelModel,
    MisalignmentProfile,
    SensorStream,
    SourceSignal,
    deviation_from_center,
    sample_stream,
    simulate_scenario,
    synth_source,
)
from .ingest import (
    BifurcatedSet,
    DatasetSplit,
    ParseError,
    bifurcate,
    downsample,
    interleave,
    normalize_text,
    read_csv,
    read_entities,
    read_transcripts,
    split_dataset,
    write_csv,
)
from .gbm import (
    CvReport,
    GbmModel,
    GbmParams,
    fit,
    grid_search_cv,
    load_model,
    param_grid,
    predict,
    r_squared,
    save_model,
)
from .fusion import (
    DegenerateInputError,
    FeatureSpec,
    FitReport,
    HoldoutReport,
    NormStats,
    StagModel,
    TrainResult,
    build_features,
    evaluate_model,
    holdout_report,
    load_stag_model,
    noise_reduce,
    pearson,
    save_stag_model,
    select_axes,
    snr_db,
    spline_midpoints,
    train_stag,
    upsample,
    znormalize,
)
from .metrics import (
    CorpusReport,
    EntityRecord,
    TranscriptPair,
    WerBreakdown,
    corpus_report,
    sentence_correct,
    wer,
)

__version__ = "0.1.0"

__all__ = [
    "BifurcatedSet", "ChannelModel", "CorpusReport", "CvReport",
    "DatasetSplit", "DegenerateInputError", "EntityRecord", "FeatureSpec",
    "FitReport", "GbmModel", "GbmParams", "HoldoutReport",
    "MisalignmentProfile", "NormStats", "ParseError", "SensorStream",
    "SourceSignal", "StagModel", "TrainResult", "TranscriptPair",
    "WerBreakdown", "bifurcate", "build_features", "corpus_report",
    "deviation_from_center", "downsample", "evaluate_model", "fit",
    "grid_search_cv", "holdout_report", "interleave", "load_model",
    "load_stag_model", "noise_reduce", "normalize_text", "param_grid",
    "pearson", "predict", "r_squared", "read_csv", "read_entities",
    "read_transcripts", "sample_stream", "save_model", "save_stag_model",
    "select_axes", "sentence_correct", "simulate_scenario", "snr_db",
    "spline_midpoints", "split_dataset", "synth_source", "train_stag",
    "upsample", "wer", "write_csv", "znormalize",
]
