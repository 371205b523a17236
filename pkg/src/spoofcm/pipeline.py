"""Train/score orchestration for GMM countermeasures and the silence
interventions (baseline vs trimmed-audio retraining/rescoring)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .audio import read_audio, resolve_audio_path
from .features import FeatureRecipe, compute_features
from .gmm import DiagGmm, EmConfig, em_fit, kmeans_init, llr_score
from .metrics import CostModel, ScoreSet, compute_eer, compute_min_tdcf
from .protocol import ScoreRecord, TrialEntry
from .silence import trim_silence

INTERVENTION_MODES = ("I", "II", "III")


class PipelineError(ValueError):
    """Invalid pipeline configuration."""


@dataclass(frozen=True)
class GmmPipelineConfig:
    """A complete GMM countermeasure: features + backend + trim policy."""

    recipe: FeatureRecipe = field(default_factory=FeatureRecipe)
    mixtures: int = 128
    em: EmConfig = field(default_factory=EmConfig)
    cost: CostModel = field(default_factory=CostModel)
    trim_mode: str = "trailing"
    trim_epsilon: float = 0.0


def load_utterance(audio_root, utterance_id: str, trim: bool,
                   cfg: GmmPipelineConfig):
    buf = read_audio(resolve_audio_path(audio_root, utterance_id))
    if trim:
        buf = trim_silence(buf, cfg.trim_mode, cfg.trim_epsilon)
    return buf


def extract_for_entries(entries, audio_root, cfg: GmmPipelineConfig,
                        trim: bool) -> dict[str, np.ndarray]:
    """Per-utterance feature arrays; skips clips shorter than one window."""
    out = {}
    for e in entries:
        buf = load_utterance(audio_root, e.utterance_id, trim, cfg)
        if len(buf) < cfg.recipe.stft_config(buf.sample_rate).window_length:
            continue
        out[e.utterance_id] = compute_features(buf, cfg.recipe).data
    if not out:
        raise PipelineError("no utterance was long enough to extract features")
    return out


def train_class_gmms(entries, feats: dict[str, np.ndarray],
                     cfg: GmmPipelineConfig) -> dict[str, DiagGmm]:
    """One GMM per class on pooled frames of that class's utterances."""
    pools: dict[str, list[np.ndarray]] = {"bonafide": [], "spoof": []}
    for e in entries:
        if e.utterance_id in feats:
            pools[e.key].append(feats[e.utterance_id])
    models = {}
    for key, mats in pools.items():
        if not mats:
            raise PipelineError(f"no training frames for class '{key}'")
        frames = np.vstack(mats)
        init = kmeans_init(frames, cfg.mixtures, seed=cfg.em.seed,
                           variance_floor=cfg.em.variance_floor)
        models[key], _ = em_fit(frames, init, cfg.em)
    return models


def score_entries(models: dict[str, DiagGmm], entries,
                  feats: dict[str, np.ndarray]) -> list[ScoreRecord]:
    records = []
    for e in entries:
        if e.utterance_id not in feats:
            continue
        s = llr_score(models["bonafide"], models["spoof"], feats[e.utterance_id])
        records.append(ScoreRecord(utterance_id=e.utterance_id, score=s))
    return records


def _score_set(records, entries) -> ScoreSet:
    key_by_utt = {e.utterance_id: e.key for e in entries}
    bona = [r.score for r in records if key_by_utt[r.utterance_id] == "bonafide"]
    spoof = [r.score for r in records if key_by_utt[r.utterance_id] == "spoof"]
    return ScoreSet(bonafide_scores=np.asarray(bona),
                    spoof_scores=np.asarray(spoof))


@dataclass
class MetricPair:
    tdcf: float
    eer: float


@dataclass
class InterventionReport:
    mode: str
    before: MetricPair
    after: MetricPair

    def table_row(self) -> str:
        return (f"{self.mode:>4}  t-DCF {self.before.tdcf:.4f} -> "
                f"{self.after.tdcf:.4f}   EER% {100 * self.before.eer:.2f} -> "
                f"{100 * self.after.eer:.2f}")


class _ExperimentCache:
    """Shares feature extraction and model training across intervention modes."""

    def __init__(self, cfg: GmmPipelineConfig, train_entries, test_entries,
                 audio_root):
        self.cfg = cfg
        self.train_entries = list(train_entries)
        self.test_entries = list(test_entries)
        self.audio_root = audio_root
        self._feats: dict[tuple[str, bool], dict[str, np.ndarray]] = {}
        self._models: dict[bool, dict[str, DiagGmm]] = {}

    def feats(self, subset: str, trim: bool) -> dict[str, np.ndarray]:
        key = (subset, trim)
        if key not in self._feats:
            entries = self.train_entries if subset == "train" else self.test_entries
            self._feats[key] = extract_for_entries(entries, self.audio_root,
                                                   self.cfg, trim)
        return self._feats[key]

    def models(self, trim: bool) -> dict[str, DiagGmm]:
        if trim not in self._models:
            self._models[trim] = train_class_gmms(
                self.train_entries, self.feats("train", trim), self.cfg
            )
        return self._models[trim]

    def evaluate(self, train_trim: bool, test_trim: bool) -> MetricPair:
        records = score_entries(self.models(train_trim), self.test_entries,
                                self.feats("test", test_trim))
        scores = _score_set(records, self.test_entries)
        tdcf, _ = compute_min_tdcf(scores, self.cfg.cost)
        eer, _ = compute_eer(scores)
        return MetricPair(tdcf=tdcf, eer=eer)


# Intervention -> (trim training audio, trim test audio)
_MODE_TRIMS = {"I": (False, True), "II": (True, False), "III": (True, True)}


def run_interventions(modes, cfg: GmmPipelineConfig, train_entries,
                      test_entries, audio_root) -> list[InterventionReport]:
    """Baseline metrics vs each requested intervention, sharing work.

    Mode I trims test audio only (models keep any silence cue but cannot use
    it), II trims training audio only, III trims both.
    """
    modes = list(modes)
    for mode in modes:
        if mode not in INTERVENTION_MODES:
            raise PipelineError(f"unknown intervention mode '{mode}'")
    cache = _ExperimentCache(cfg, train_entries, test_entries, audio_root)
    baseline = cache.evaluate(train_trim=False, test_trim=False)
    reports = []
    for mode in modes:
        train_trim, test_trim = _MODE_TRIMS[mode]
        after = cache.evaluate(train_trim=train_trim, test_trim=test_trim)
        reports.append(InterventionReport(mode=mode, before=baseline, after=after))
    return reports


def run_intervention(mode: str, cfg: GmmPipelineConfig, train_entries,
                     test_entries, audio_root) -> InterventionReport:
    """Single-mode convenience wrapper around :func:`run_interventions`."""
    return run_interventions([mode], cfg, train_entries, test_entries,
                             audio_root)[0]
