"""Synthetic audit corpus whose classes differ only in trailing silence.

Every utterance carries the same kind of noisy harmonic "speech" plus an
identically distributed run of leading zeros; only the trailing zero-run
length depends on the class label. Any detector separating the classes is
therefore reading the padding, which makes the corpus a controlled fixture
for the silence interventions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, write_audio
from .protocol import TrialEntry, write_protocol


@dataclass(frozen=True)
class CorpusSpec:
    n_per_class: int = 500
    sample_rate: int = 8000
    speech_ms: tuple[int, int] = (700, 1100)
    leading_ms: tuple[int, int] = (0, 40)        # same for both classes
    bona_trailing_ms: tuple[int, int] = (0, 50)
    spoof_trailing_ms: tuple[int, int] = (250, 450)
    n_speakers: int = 20
    train_fraction: float = 0.5


def _speech_like(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    x = np.zeros(n)
    f0 = rng.uniform(90.0, 240.0)
    for h in range(1, 6):
        amp = rng.uniform(0.2, 1.0) / h
        x += amp * np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi))
    # slow random amplitude envelope, always positive
    env_points = rng.uniform(0.3, 1.0, size=8)
    env = np.interp(np.linspace(0, 7, n), np.arange(8), env_points)
    x = x * env + rng.normal(0.0, 0.15, size=n)
    peak = np.max(np.abs(x))
    return 0.5 * x / peak


def _ms_to_samples(rng, lo_hi: tuple[int, int], sr: int) -> int:
    lo, hi = lo_hi
    return int(rng.integers(lo * sr // 1000, hi * sr // 1000 + 1))


def generate_corpus(out_dir, seed: int, spec: CorpusSpec = CorpusSpec()):
    """Write WAVs, train/test protocols and a ground-truth padding CSV.

    Returns (train_protocol_path, test_protocol_path, audio_dir).
    """
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    sr = spec.sample_rate

    entries: list[TrialEntry] = []
    truth_rows = []
    for cls_idx, key in enumerate(("bonafide", "spoof")):
        trailing_range = (spec.bona_trailing_ms if key == "bonafide"
                          else spec.spoof_trailing_ms)
        for i in range(spec.n_per_class):
            utt = f"SY_{key[:4].upper()}_{i:04d}"
            speaker = f"SYS{rng.integers(spec.n_speakers):03d}"
            n_speech = _ms_to_samples(rng, spec.speech_ms, sr)
            n_lead = _ms_to_samples(rng, spec.leading_ms, sr)
            n_trail = _ms_to_samples(rng, trailing_range, sr)
            speech = _speech_like(rng, n_speech, sr)
            samples = np.concatenate([np.zeros(n_lead), speech, np.zeros(n_trail)])
            write_audio(audio_dir / f"{utt}.wav",
                        AudioBuffer(samples=samples, sample_rate=sr, source_id=utt))
            attack = "-" if key == "bonafide" else f"A0{1 + i % 2}"
            entries.append(TrialEntry(speaker_id=speaker, utterance_id=utt,
                                      attack_id=attack, key=key))
            truth_rows.append((utt, key, n_lead, n_trail))

    order = rng.permutation(len(entries))
    n_train = int(round(spec.train_fraction * len(entries)))
    train = sorted((entries[i] for i in order[:n_train]),
                   key=lambda e: e.utterance_id)
    test = sorted((entries[i] for i in order[n_train:]),
                  key=lambda e: e.utterance_id)

    train_path = out_dir / "train_protocol.txt"
    test_path = out_dir / "test_protocol.txt"
    write_protocol(train_path, train)
    write_protocol(test_path, test)
    with (out_dir / "padding_truth.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "key", "leading_samples", "trailing_samples"])
        writer.writerows(sorted(truth_rows))
    return train_path, test_path, audio_dir
