"""Speech anti-spoofing countermeasure toolkit with silence-shortcut auditing."""

__version__ = "0.1.0"

from .audio import AudioBuffer, read_audio, write_audio
from .features import FeatureMatrix, FeatureRecipe, compute_features
from .gmm import DiagGmm, EmConfig, avg_loglik, em_fit, kmeans_init, llr_score
from .metrics import CostModel, ScoreSet, compute_eer, compute_min_tdcf
from .protocol import TrialEntry, parse_protocol, partition_dataset
from .silence import measure_zero_runs, trim_silence

__all__ = [
    "AudioBuffer", "read_audio", "write_audio",
    "FeatureMatrix", "FeatureRecipe", "compute_features",
    "DiagGmm", "EmConfig", "kmeans_init", "em_fit", "avg_loglik", "llr_score",
    "CostModel", "ScoreSet", "compute_eer", "compute_min_tdcf",
    "TrialEntry", "parse_protocol", "partition_dataset",
    "measure_zero_runs", "trim_silence",
    "__version__",
]
