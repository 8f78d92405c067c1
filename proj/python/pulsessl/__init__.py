"""Python bindings for the pulse library: spectral heart-rate measures,
curriculum ratios, PCB1 clip reading and the gen/train/score/ablate
commands."""

from ._core import (
    ConfigError,
    CorruptFile,
    DegenerateSignal,
    EpochOutOfRange,
    InvalidSpec,
    IoError,
    NonFiniteInput,
    PulseError,
    VersionMismatch,
    ablate,
    gen,
    heart_rate,
    ipr,
    pearson,
    psd,
    ratio_at,
    read_clip,
    score,
    selection_size,
    snr,
    synth_truth,
    train,
)

__all__ = [
    "ConfigError",
    "CorruptFile",
    "DegenerateSignal",
    "EpochOutOfRange",
    "InvalidSpec",
    "IoError",
    "NonFiniteInput",
    "PulseError",
    "VersionMismatch",
    "ablate",
    "gen",
    "heart_rate",
    "ipr",
    "pearson",
    "psd",
    "ratio_at",
    "read_clip",
    "score",
    "selection_size",
    "snr",
    "synth_truth",
    "train",
]
