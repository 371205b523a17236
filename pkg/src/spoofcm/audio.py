"""Audio file I/O: canonical mono waveforms from 16-bit PCM WAV and FLAC files."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _flac

# Integer PCM decodes by the full scale 2^(bits-1); encoding uses the
# symmetric 32767 so -1.0 stays representable without clipping logic.
DECODE_SCALE = 32768.0
ENCODE_SCALE = 32767


class AudioFormatError(ValueError):
    """Unsupported, malformed or empty audio input."""


@dataclass
class AudioBuffer:
    """Mono sampled waveform with its rate and an utterance identifier."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise AudioFormatError("AudioBuffer samples must be 1-D")
        if self.sample_rate <= 0:
            raise AudioFormatError("sample rate must be positive")
        if self.samples.size < 1:
            raise AudioFormatError("empty audio")
        if not np.all(np.isfinite(self.samples)):
            raise AudioFormatError("non-finite sample values")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _read_wav(path: Path) -> tuple[np.ndarray, int]:
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise AudioFormatError(f"{path}: compressed WAV is not supported")
            if wf.getsampwidth() != 2:
                raise AudioFormatError(
                    f"{path}: only 16-bit PCM WAV is supported "
                    f"(got {8 * wf.getsampwidth()}-bit)"
                )
            if wf.getnchannels() != 1:
                raise AudioFormatError(
                    f"{path}: got {wf.getnchannels()} channels, only mono is supported"
                )
            n = wf.getnframes()
            raw = wf.readframes(n)
            rate = wf.getframerate()
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    if len(raw) < 2 * n:
        raise AudioFormatError(f"{path}: truncated WAV payload")
    pcm = np.frombuffer(raw, dtype="<i2")
    return pcm.astype(np.int32), rate


def _read_flac(path: Path) -> tuple[np.ndarray, int]:
    data = path.read_bytes()
    try:
        pcm, rate, bits = _flac.decode(data)
    except _flac.FlacError as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    if bits != 16:
        raise AudioFormatError(f"{path}: only 16-bit FLAC is supported (got {bits}-bit)")
    return pcm, rate


def read_audio(path) -> AudioBuffer:
    """Decode a 16-bit PCM WAV or FLAC file into an :class:`AudioBuffer`.

    Samples are normalized to [-1, 1] by dividing by 2^15. Stereo files,
    non-16-bit payloads and empty payloads are rejected. The sample rate is
    taken from the file; nothing is resampled.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioFormatError(f"{path}: no such file")
    head = path.open("rb").read(4)
    if head == b"fLaC":
        pcm, rate = _read_flac(path)
    elif head == b"RIFF":
        pcm, rate = _read_wav(path)
    else:
        raise AudioFormatError(f"{path}: not a WAV or FLAC file")
    if pcm.size == 0:
        raise AudioFormatError(f"{path}: empty audio")
    samples = pcm / DECODE_SCALE
    return AudioBuffer(samples=samples, sample_rate=rate, source_id=path.stem)


def write_audio(path, buffer: AudioBuffer) -> None:
    """Write an :class:`AudioBuffer` as 16-bit PCM WAV.

    Values are quantized by round(x * 32767); inputs outside [-1, 1] are an
    error rather than silently clipped.
    """
    samples = np.asarray(buffer.samples, dtype=np.float64)
    if samples.size == 0:
        raise AudioFormatError("refusing to write empty audio")
    if np.max(np.abs(samples)) > 1.0:
        raise AudioFormatError("samples outside [-1, 1]")
    pcm = np.round(samples * ENCODE_SCALE).astype("<i2")
    path = Path(path)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(buffer.sample_rate)
        wf.writeframes(pcm.tobytes())


AUDIO_EXTENSIONS = (".wav", ".flac")


def resolve_audio_path(root, utterance_id: str) -> Path:
    """Locate ``utterance_id`` under ``root`` by the supported extensions."""
    root = Path(root)
    for ext in AUDIO_EXTENSIONS:
        cand = root / f"{utterance_id}{ext}"
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"no audio file for '{utterance_id}' under {root}")
