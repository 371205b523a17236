"""Measure, trim and intervene on leading/trailing digital silence.

Datasets whose classes differ in how much silence pads the recordings let a
detector score well without listening to the speech. The report here
surfaces that risk; the interventions quantify it by retraining/rescoring
with the padding removed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer, read_audio, resolve_audio_path
from .protocol import BONAFIDE

TRIM_MODES = ("leading", "trailing", "both")


class SilenceError(ValueError):
    """Invalid silence-audit input."""


@dataclass
class SilenceProfile:
    utterance_id: str
    leading_run: int
    trailing_run: int
    total_len: int
    full_silence: bool = False


def measure_zero_runs(buffer: AudioBuffer, epsilon: float = 0.0) -> SilenceProfile:
    """Lengths of the maximal near-zero prefix and suffix.

    With the default epsilon = 0 only exactly-zero samples count. A fully
    silent buffer reports leading = trailing = total length and sets the
    full-silence flag.
    """
    x = np.asarray(buffer.samples)
    n = x.size
    nonzero = np.flatnonzero(np.abs(x) > epsilon)
    if nonzero.size == 0:
        return SilenceProfile(buffer.source_id, n, n, n, full_silence=True)
    return SilenceProfile(buffer.source_id, int(nonzero[0]),
                          int(n - 1 - nonzero[-1]), n)


def trim_silence(buffer: AudioBuffer, mode: str = "trailing",
                 epsilon: float = 0.0) -> AudioBuffer:
    """Remove the measured silence runs per mode.

    A fully silent input collapses to a single zero sample instead of an
    empty buffer, so protocol joins never lose rows; callers can detect the
    case via :func:`measure_zero_runs`. Idempotent for every mode.
    """
    if mode not in TRIM_MODES:
        raise SilenceError(f"unknown trim mode '{mode}'")
    profile = measure_zero_runs(buffer, epsilon)
    if profile.full_silence:
        return AudioBuffer(samples=np.zeros(1), sample_rate=buffer.sample_rate,
                           source_id=buffer.source_id)
    start = profile.leading_run if mode in ("leading", "both") else 0
    stop = buffer.samples.size - (
        profile.trailing_run if mode in ("trailing", "both") else 0
    )
    return AudioBuffer(samples=buffer.samples[start:stop].copy(),
                       sample_rate=buffer.sample_rate,
                       source_id=buffer.source_id)


@dataclass
class GroupStats:
    scope: str             # "class" or "attack"
    name: str
    count: int
    lead_mean: float
    lead_median: float
    lead_p90: float
    trail_mean: float
    trail_median: float
    trail_p90: float
    lead_median_sec: float
    trail_median_sec: float


@dataclass
class SilenceReport:
    groups: list[GroupStats]
    missing_files: list[str]
    cue_warning: bool
    warn_ratio: float
    full_silence_utts: list[str] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.missing_files)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([
            "scope", "name", "count",
            "leading_mean_samples", "leading_median_samples", "leading_p90_samples",
            "trailing_mean_samples", "trailing_median_samples", "trailing_p90_samples",
            "leading_median_sec", "trailing_median_sec",
        ])
        for g in self.groups:
            writer.writerow([
                g.scope, g.name, g.count,
                f"{g.lead_mean:.3f}", f"{g.lead_median:.3f}", f"{g.lead_p90:.3f}",
                f"{g.trail_mean:.3f}", f"{g.trail_median:.3f}", f"{g.trail_p90:.3f}",
                f"{g.lead_median_sec:.6f}", f"{g.trail_median_sec:.6f}",
            ])
        writer.writerow([])
        writer.writerow(["cue_warning", str(self.cue_warning).lower()])
        writer.writerow(["warn_ratio", self.warn_ratio])
        writer.writerow(["missing_files", len(self.missing_files)])
        return buf.getvalue()


def _group_stats(scope, name, leads, trails, lead_secs, trail_secs) -> GroupStats:
    leads = np.asarray(leads, dtype=np.float64)
    trails = np.asarray(trails, dtype=np.float64)
    return GroupStats(
        scope=scope, name=name, count=leads.size,
        lead_mean=float(leads.mean()), lead_median=float(np.median(leads)),
        lead_p90=float(np.percentile(leads, 90)),
        trail_mean=float(trails.mean()), trail_median=float(np.median(trails)),
        trail_p90=float(np.percentile(trails, 90)),
        lead_median_sec=float(np.median(np.asarray(lead_secs))),
        trail_median_sec=float(np.median(np.asarray(trail_secs))),
    )


def silence_report(entries, audio_root, epsilon: float = 0.0,
                   warn_ratio: float = 1.5) -> SilenceReport:
    """Per-class and per-attack silence-run statistics for a protocol.

    Missing audio files are listed and skipped rather than fatal. The cue
    warning fires when the trailing-run medians of the two classes differ by
    more than ``warn_ratio`` (a zero median against a positive one always
    fires), flagging a likely class-dependent padding shortcut.
    """
    entries = list(entries)
    if not entries:
        raise SilenceError("empty protocol")
    per_key: dict[str, list] = {}
    per_attack: dict[str, list] = {}
    missing: list[str] = []
    full_silence: list[str] = []
    for e in entries:
        try:
            path = resolve_audio_path(audio_root, e.utterance_id)
        except FileNotFoundError:
            missing.append(e.utterance_id)
            continue
        buf = read_audio(path)
        prof = measure_zero_runs(buf, epsilon)
        if prof.full_silence:
            full_silence.append(e.utterance_id)
        rec = (prof.leading_run, prof.trailing_run,
               prof.leading_run / buf.sample_rate,
               prof.trailing_run / buf.sample_rate)
        per_key.setdefault(e.key, []).append(rec)
        per_attack.setdefault(e.attack_id, []).append(rec)
    if not per_key:
        raise SilenceError("no protocol utterance resolved to an audio file")

    groups: list[GroupStats] = []
    for name in sorted(per_key):
        recs = per_key[name]
        groups.append(_group_stats("class", name, [r[0] for r in recs],
                                   [r[1] for r in recs], [r[2] for r in recs],
                                   [r[3] for r in recs]))
    for name in sorted(per_attack):
        recs = per_attack[name]
        groups.append(_group_stats("attack", name, [r[0] for r in recs],
                                   [r[1] for r in recs], [r[2] for r in recs],
                                   [r[3] for r in recs]))

    by_class = {g.name: g for g in groups if g.scope == "class"}
    warning = False
    if BONAFIDE in by_class and "spoof" in by_class:
        a = by_class[BONAFIDE].trail_median_sec
        b = by_class["spoof"].trail_median_sec
        lo, hi = min(a, b), max(a, b)
        if hi > 0:
            warning = (hi / lo > warn_ratio) if lo > 0 else True
    return SilenceReport(groups=groups, missing_files=missing,
                         cue_warning=warning, warn_ratio=warn_ratio,
                         full_silence_utts=full_silence)
