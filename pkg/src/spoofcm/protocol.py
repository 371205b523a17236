"""ASVspoof-style protocol parsing, score files and dataset partitioning.

The partition step carves the original train/dev protocols into three
subsets: ``train_tr`` (training, held-out attacks removed), ``dev_es``
(validation, only held-out attacks, restricted to a chosen speaker set) and
``dev_lr`` (fusion training, all attacks, remaining speakers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BONAFIDE = "bonafide"
SPOOF = "spoof"
NO_ATTACK = "-"


class ProtocolError(ValueError):
    """Malformed protocol or score file, or an unsatisfiable partition spec."""


@dataclass(frozen=True)
class TrialEntry:
    speaker_id: str
    utterance_id: str
    attack_id: str
    key: str
    environment_id: str | None = None

    @property
    def is_bonafide(self) -> bool:
        return self.key == BONAFIDE

    def to_line(self) -> str:
        cols = [self.speaker_id, self.utterance_id]
        if self.environment_id is not None:
            cols.append(self.environment_id)
        cols += [self.attack_id, self.key]
        return " ".join(cols)


def parse_protocol(path) -> list[TrialEntry]:
    """Read a whitespace-separated protocol file.

    Both 4-column (speaker, utterance, attack, key) and 5-column (speaker,
    utterance, environment, attack, key) layouts are accepted, detected per
    line by column count. Keys are matched case-insensitively; anything else
    is an error naming the offending line.
    """
    path = Path(path)
    entries: list[TrialEntry] = []
    seen: set[str] = set()
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split()
        if len(cols) == 4:
            speaker, utt, attack, key = cols
            env = None
        elif len(cols) == 5:
            speaker, utt, env, attack, key = cols
        else:
            raise ProtocolError(
                f"{path}:{ln}: expected 4 or 5 columns, got {len(cols)}"
            )
        key = key.lower()
        if key not in (BONAFIDE, SPOOF):
            raise ProtocolError(f"{path}:{ln}: unknown key '{cols[-1]}'")
        if (key == BONAFIDE) != (attack == NO_ATTACK):
            raise ProtocolError(
                f"{path}:{ln}: key '{key}' inconsistent with attack id '{attack}'"
            )
        if utt in seen:
            raise ProtocolError(f"{path}:{ln}: duplicate utterance id '{utt}'")
        seen.add(utt)
        entries.append(TrialEntry(speaker_id=speaker, utterance_id=utt,
                                  attack_id=attack, key=key, environment_id=env))
    return entries


def write_protocol(path, entries) -> None:
    Path(path).write_text("".join(e.to_line() + "\n" for e in entries))


def attacks_of(entries) -> set[str]:
    return {e.attack_id for e in entries if not e.is_bonafide}


def speakers_of(entries) -> set[str]:
    return {e.speaker_id for e in entries}


@dataclass(frozen=True)
class PartitionSpec:
    heldout_attacks: frozenset
    seed: int
    dev_es_speaker_fraction: float = 0.5
    dev_es_speakers: frozenset | None = None  # overrides the fraction

    def __post_init__(self):
        if not self.heldout_attacks:
            raise ProtocolError("heldout_attacks must be non-empty")
        if not 0.0 < self.dev_es_speaker_fraction < 1.0:
            raise ProtocolError("dev_es_speaker_fraction must be in (0, 1)")


@dataclass
class Partition:
    train_tr: list[TrialEntry]
    dev_es: list[TrialEntry]
    dev_lr: list[TrialEntry]
    discarded_train: list[TrialEntry]
    discarded_dev: list[TrialEntry]
    dev_es_speakers: set[str]

    def manifest_rows(self) -> list[tuple[str, str]]:
        """(utterance_id, subset) for every input row; nothing is lost."""
        rows = [(e.utterance_id, "train_tr") for e in self.train_tr]
        rows += [(e.utterance_id, "dev_es") for e in self.dev_es]
        rows += [(e.utterance_id, "dev_lr") for e in self.dev_lr]
        rows += [(e.utterance_id, "discarded_train") for e in self.discarded_train]
        rows += [(e.utterance_id, "discarded_dev") for e in self.discarded_dev]
        return rows

    def summary(self) -> dict[str, dict[str, int]]:
        out = {}
        for name in ("train_tr", "dev_es", "dev_lr"):
            entries = getattr(self, name)
            out[name] = {
                "total": len(entries),
                "bonafide": sum(e.is_bonafide for e in entries),
                "spoof": sum(not e.is_bonafide for e in entries),
                "speakers": len(speakers_of(entries)),
                "attacks": len(attacks_of(entries)),
            }
        return out


def partition_dataset(train, dev, spec: PartitionSpec) -> Partition:
    """Split per the held-out-attack / held-out-speaker scheme.

    train_tr keeps train rows whose attack is not held out (bonafide rows
    always stay). dev_es keeps dev rows with held-out attacks plus bonafide
    rows, restricted to the seed-selected dev_es speakers. dev_lr keeps all
    rows of the remaining dev speakers, every attack included. Deterministic
    given the seed.
    """
    train_attacks = attacks_of(train)
    dev_attacks = attacks_of(dev)
    held = set(spec.heldout_attacks)
    if not held <= train_attacks:
        raise ProtocolError(
            f"held-out attacks {sorted(held - train_attacks)} absent from the "
            "training protocol"
        )
    if not held <= dev_attacks:
        raise ProtocolError(
            f"held-out attacks {sorted(held - dev_attacks)} absent from the "
            "dev protocol"
        )

    train_tr = [e for e in train if e.is_bonafide or e.attack_id not in held]
    discarded_train = [e for e in train if not e.is_bonafide and e.attack_id in held]
    if not any(not e.is_bonafide for e in train_tr):
        raise ProtocolError("held-out set leaves train_tr without spoof rows")

    if spec.dev_es_speakers is not None:
        es_speakers = set(spec.dev_es_speakers)
    else:
        speakers = sorted(speakers_of(dev))
        rng = np.random.default_rng(spec.seed)
        rng.shuffle(speakers)
        k = int(round(spec.dev_es_speaker_fraction * len(speakers)))
        k = min(max(k, 1), len(speakers) - 1) if len(speakers) > 1 else 0
        if k == 0:
            raise ProtocolError("dev protocol has too few speakers to split")
        es_speakers = set(speakers[:k])

    dev_es, dev_lr, discarded_dev = [], [], []
    for e in dev:
        if e.speaker_id in es_speakers:
            if e.is_bonafide or e.attack_id in held:
                dev_es.append(e)
            else:
                discarded_dev.append(e)
        else:
            dev_lr.append(e)

    for name, subset in (("dev_es", dev_es), ("dev_lr", dev_lr)):
        if not subset:
            raise ProtocolError(f"partition spec leaves {name} empty")
    if not any(not e.is_bonafide for e in dev_es):
        raise ProtocolError("partition spec leaves dev_es without spoof rows")
    lost = dev_attacks - attacks_of(dev_lr)
    if lost:
        raise ProtocolError(
            f"speaker split drops dev attack condition(s) {sorted(lost)} from "
            "dev_lr; pick another seed/fraction or an explicit speaker set"
        )

    return Partition(train_tr=train_tr, dev_es=dev_es, dev_lr=dev_lr,
                     discarded_train=discarded_train, discarded_dev=discarded_dev,
                     dev_es_speakers=es_speakers)


# ---------------------------------------------------------------------------
# Score files: one `utterance_id score` pair per line.

@dataclass(frozen=True)
class ScoreRecord:
    utterance_id: str
    score: float


def read_scores(path) -> list[ScoreRecord]:
    path = Path(path)
    records: list[ScoreRecord] = []
    seen: set[str] = set()
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ProtocolError(f"{path}:{ln}: expected 'utterance_id score'")
        utt, raw = parts
        try:
            score = float(raw)
        except ValueError as exc:
            raise ProtocolError(f"{path}:{ln}: unparseable score '{raw}'") from exc
        if not math.isfinite(score):
            raise ProtocolError(f"{path}:{ln}: non-finite score")
        if utt in seen:
            raise ProtocolError(f"{path}:{ln}: duplicate utterance id '{utt}'")
        seen.add(utt)
        records.append(ScoreRecord(utterance_id=utt, score=score))
    return records


def write_scores(path, records) -> None:
    # repr round-trips float64 exactly
    Path(path).write_text(
        "".join(f"{r.utterance_id} {float(r.score)!r}\n" for r in records)
    )


def scores_by_class(records, entries) -> tuple[np.ndarray, np.ndarray]:
    """Join scores with protocol labels; every score must have a label."""
    key_by_utt = {e.utterance_id: e.key for e in entries}
    bona, spoof = [], []
    for r in records:
        key = key_by_utt.get(r.utterance_id)
        if key is None:
            raise ProtocolError(f"utterance '{r.utterance_id}' missing from protocol")
        (bona if key == BONAFIDE else spoof).append(r.score)
    return np.asarray(bona), np.asarray(spoof)
