"""Frame- and utterance-level feature extraction.

Covers the cepstral family (MFCC / inverted-mel / linear-frequency / CQCC /
sub-band centroid magnitudes), the long-term average spectrum, delta
stacking and mean-variance normalization, plus the binary feature-file
container used to persist extracted features.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct

LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8

MEL_BREAK_HZ = 700.0
MEL_SCALE = 2595.0


class FeatureError(ValueError):
    """Invalid feature-extraction input or configuration."""


def hz_to_mel(f):
    return MEL_SCALE * np.log10(1.0 + np.asarray(f, dtype=np.float64) / MEL_BREAK_HZ)


def mel_to_hz(m):
    return MEL_BREAK_HZ * (10.0 ** (np.asarray(m, dtype=np.float64) / MEL_SCALE) - 1.0)


@dataclass(frozen=True)
class StftConfig:
    """Short-time analysis geometry; the window is always Hamming."""

    window_length: int
    hop: int
    fft_size: int

    def __post_init__(self):
        if self.window_length < 1 or self.hop < 1:
            raise FeatureError("window_length and hop must be >= 1")
        if self.fft_size < self.window_length:
            raise FeatureError("fft_size must be >= window_length")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class CqtConfig:
    """Constant-Q analysis geometry."""

    bins_per_octave: int
    f_min: float
    f_max: float
    hop: int

    def __post_init__(self):
        if self.bins_per_octave < 1:
            raise FeatureError("bins_per_octave must be >= 1")
        if not (0 < self.f_min < self.f_max):
            raise FeatureError("need 0 < f_min < f_max")
        if self.hop < 1:
            raise FeatureError("hop must be >= 1")

    @property
    def n_bins(self) -> int:
        return int(math.floor(self.bins_per_octave * math.log2(self.f_max / self.f_min))) + 1

    @property
    def q_factor(self) -> float:
        return 1.0 / (2.0 ** (1.0 / self.bins_per_octave) - 1.0)

    def bin_frequencies(self) -> np.ndarray:
        j = np.arange(self.n_bins)
        return self.f_min * 2.0 ** (j / self.bins_per_octave)

    @classmethod
    def default_for(cls, sample_rate: int, hop: int, bins_per_octave: int = 96,
                    octaves: int = 9) -> "CqtConfig":
        f_max = sample_rate / 2.0
        return cls(bins_per_octave=bins_per_octave, f_min=f_max / 2.0 ** octaves,
                   f_max=f_max, hop=hop)


@dataclass
class FilterBank:
    """Triangular filter weights over the one-sided FFT bin grid."""

    matrix: np.ndarray            # n_filters x n_bins, non-negative
    kind: str                     # mel | inverted-mel | linear
    center_freqs: np.ndarray      # Hz, one per filter
    bin_freqs: np.ndarray         # Hz, one per column

    @property
    def n_filters(self) -> int:
        return self.matrix.shape[0]


@dataclass
class FeatureMatrix:
    """frames x dims feature array tagged with what it contains."""

    data: np.ndarray
    kind: str
    n_static: int = 0
    includes_deltas: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise FeatureError("feature data must be 2-D (frames x dims)")
        if not np.all(np.isfinite(self.data)):
            raise FeatureError("non-finite feature values")
        if self.n_static == 0:
            self.n_static = self.data.shape[1]
        expected = 3 * self.n_static if self.includes_deltas else self.n_static
        if self.data.shape[1] != expected:
            raise FeatureError(
                f"dims {self.data.shape[1]} inconsistent with n_static={self.n_static}"
                f" (deltas={self.includes_deltas})"
            )

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    @property
    def tag(self) -> str:
        return self.kind + ("+sda" if self.includes_deltas else "")


def stft_magnitude(buffer, cfg: StftConfig) -> np.ndarray:
    """Magnitude spectrogram of a Hamming-windowed STFT.

    Frame t starts at t*hop; the frame count is floor((N - window)/hop) + 1
    with no padding anywhere.
    """
    x = np.asarray(buffer.samples, dtype=np.float64)
    n = x.size
    if n < cfg.window_length:
        raise FeatureError(
            f"signal of {n} samples is shorter than one window ({cfg.window_length})"
        )
    n_frames = (n - cfg.window_length) // cfg.hop + 1
    idx = np.arange(cfg.window_length)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hamming(cfg.window_length)[None, :]
    return np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1))


def _triangle_matrix(edges_hz: np.ndarray, bin_freqs: np.ndarray) -> np.ndarray:
    n_filters = edges_hz.size - 2
    mat = np.zeros((n_filters, bin_freqs.size))
    for i in range(n_filters):
        lo, mid, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        mat[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return mat


def make_filterbank(kind: str, n_filters: int, cfg: StftConfig,
                    sample_rate: int) -> FilterBank:
    """Build a triangular filterbank spanning [0, sample_rate/2].

    ``mel`` spaces centers on the mel scale, ``linear`` equally in Hz, and
    ``inverted-mel`` is the mel bank mirrored on the linear frequency axis
    (filter i equals the frequency-flip of mel filter n_filters+1-i).
    """
    if n_filters < 2:
        raise FeatureError("need at least 2 filters")
    nyquist = sample_rate / 2.0
    bin_freqs = np.arange(cfg.n_bins) * sample_rate / cfg.fft_size

    if kind == "linear":
        edges = np.linspace(0.0, nyquist, n_filters + 2)
        matrix = _triangle_matrix(edges, bin_freqs)
        centers = edges[1:-1]
    elif kind == "mel":
        edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), n_filters + 2))
        matrix = _triangle_matrix(edges, bin_freqs)
        centers = edges[1:-1]
    elif kind == "inverted-mel":
        mel_bank = make_filterbank("mel", n_filters, cfg, sample_rate)
        matrix = mel_bank.matrix[::-1, ::-1].copy()
        centers = np.sort(nyquist - mel_bank.center_freqs)
    else:
        raise FeatureError(f"unknown filterbank kind '{kind}'")

    if not np.all((matrix > 0).any(axis=1)):
        raise FeatureError(
            f"{n_filters} '{kind}' filters exceed the resolution of a "
            f"{cfg.fft_size}-point FFT (empty filter)"
        )
    return FilterBank(matrix=matrix, kind=kind, center_freqs=np.asarray(centers),
                      bin_freqs=bin_freqs)


_KIND_FROM_BANK = {"mel": "mfcc", "inverted-mel": "imfcc", "linear": "lfcc"}


def filterbank_cepstra(mag: np.ndarray, fb: FilterBank, n_ceps: int,
                       kind: str | None = None) -> FeatureMatrix:
    """Log filterbank energies followed by an orthonormal DCT-II.

    Energies are floored at 1e-10 before the log so silent frames stay
    finite. c0 is kept.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != fb.matrix.shape[1]:
        raise FeatureError(
            f"magnitude bins {mag.shape} do not match filterbank width "
            f"{fb.matrix.shape[1]}"
        )
    energies = mag ** 2 @ fb.matrix.T
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    ceps = dct(logs, type=2, norm="ortho", axis=1)[:, :n_ceps]
    return FeatureMatrix(data=ceps, kind=kind or _KIND_FROM_BANK[fb.kind])


def scmc(mag: np.ndarray, fb: FilterBank, n_ceps: int) -> FeatureMatrix:
    """Sub-band centroid magnitude coefficients.

    Per filter m the centroid magnitude is
    sum_k fb_m(k) f_k mag(k) / sum_k fb_m(k) f_k with f_k the bin center in
    Hz; the log of the floored centroids goes through the same DCT as the
    other cepstra.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != fb.matrix.shape[1]:
        raise FeatureError("magnitude bins do not match filterbank width")
    weighted = fb.matrix * fb.bin_freqs[None, :]
    denom = np.maximum(weighted.sum(axis=1), 1e-30)
    centroids = (mag @ weighted.T) / denom[None, :]
    logs = np.log(np.maximum(centroids, LOG_FLOOR))
    ceps = dct(logs, type=2, norm="ortho", axis=1)[:, :n_ceps]
    return FeatureMatrix(data=ceps, kind="scmc")


def cqt_magnitude(buffer, cfg: CqtConfig) -> np.ndarray:
    """Constant-Q magnitude matrix by direct windowed-kernel correlation.

    Bin j uses a Hamming-windowed complex kernel of round(Q*sr/f_j) samples
    anchored at the frame start; the frame count is set by the longest
    (lowest-frequency) kernel, so the signal must be at least that long.
    """
    x = np.asarray(buffer.samples, dtype=np.float64)
    sr = buffer.sample_rate
    if cfg.f_max > sr / 2 + 1e-9:
        raise FeatureError("f_max exceeds Nyquist")
    freqs = cfg.bin_frequencies()
    q = cfg.q_factor
    lengths = np.maximum(np.round(q * sr / freqs).astype(int), 2)
    n_max = int(lengths[0])
    if x.size < n_max:
        raise FeatureError(
            f"signal of {x.size} samples is shorter than the f_min kernel ({n_max})"
        )
    n_frames = (x.size - n_max) // cfg.hop + 1
    out = np.empty((n_frames, freqs.size))
    starts = cfg.hop * np.arange(n_frames)
    for j, (f, n_j) in enumerate(zip(freqs, lengths)):
        win = np.hamming(n_j)
        kernel = win * np.exp(-2j * np.pi * f * np.arange(n_j) / sr)
        kernel /= win.sum()
        idx = np.arange(n_j)[None, :] + starts[:, None]
        out[:, j] = np.abs(x[idx] @ kernel.conj())
    return out


def resample_to_uniform(values: np.ndarray, axis_positions: np.ndarray,
                        n_points: int) -> np.ndarray:
    """Linearly interpolate rows of ``values`` onto a uniform axis."""
    targets = np.linspace(axis_positions[0], axis_positions[-1], n_points)
    values = np.atleast_2d(values)
    return np.stack([np.interp(targets, axis_positions, row) for row in values])


def cqcc(cq_mag: np.ndarray, n_ceps: int, n_uniform_bins: int = 1024,
         bins_per_octave: int = 96) -> FeatureMatrix:
    """Cepstra over a uniformly resampled constant-Q log power spectrum."""
    cq_mag = np.asarray(cq_mag, dtype=np.float64)
    if cq_mag.size == 0:
        raise FeatureError("empty constant-Q magnitude matrix")
    if n_uniform_bins < n_ceps:
        raise FeatureError("n_uniform_bins must be >= n_ceps")
    log_power = np.log(np.maximum(cq_mag ** 2, LOG_FLOOR))
    # relative geometric positions; a common scale factor cancels in interp
    axis = 2.0 ** (np.arange(cq_mag.shape[1]) / bins_per_octave)
    uniform = resample_to_uniform(log_power, axis, n_uniform_bins)
    ceps = dct(uniform, type=2, norm="ortho", axis=1)[:, :n_ceps]
    return FeatureMatrix(data=ceps, kind="cqcc")


def ltas(mag: np.ndarray) -> np.ndarray:
    """Long-term average spectrum: per-bin log of the mean power over frames."""
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[0] < 1:
        raise FeatureError("need at least one frame")
    return np.log(np.maximum((mag ** 2).mean(axis=0), LOG_FLOOR))


def add_deltas(static: FeatureMatrix, window_half_width: int = 2) -> FeatureMatrix:
    """Append delta and acceleration coefficients (3x the static dims).

    Uses the regression formula over +-W frames with edge frames replicated,
    so no transitions are fabricated at utterance boundaries.
    """
    if static.includes_deltas:
        raise FeatureError("features already include deltas")
    w = window_half_width
    if w < 1:
        raise FeatureError("window_half_width must be >= 1")

    def _delta(x: np.ndarray) -> np.ndarray:
        padded = np.pad(x, ((w, w), (0, 0)), mode="edge")
        num = np.zeros_like(x)
        for n in range(1, w + 1):
            num += n * (padded[w + n:padded.shape[0] - w + n] - padded[w - n:-w - n])
        return num / (2.0 * sum(n * n for n in range(1, w + 1)))

    d1 = _delta(static.data)
    d2 = _delta(d1)
    return FeatureMatrix(
        data=np.hstack([static.data, d1, d2]),
        kind=static.kind,
        n_static=static.data.shape[1],
        includes_deltas=True,
    )


@dataclass
class CmvnStats:
    """Per-dimension mean/std, computed once on a corpus and reused."""

    mean: np.ndarray
    std: np.ndarray


def cmvn(features: FeatureMatrix, stats: CmvnStats | None = None) -> FeatureMatrix:
    """Mean-variance normalize per dimension.

    Without ``stats`` the utterance's own moments are used; with ``stats``
    the provided corpus statistics are applied instead. The std is floored
    at 1e-8, so constant dimensions map to zeros.
    """
    if stats is None:
        mean = features.data.mean(axis=0)
        std = features.data.std(axis=0)
    else:
        mean = np.asarray(stats.mean, dtype=np.float64)
        std = np.asarray(stats.std, dtype=np.float64)
        if mean.shape != (features.dims,) or std.shape != (features.dims,):
            raise FeatureError("CMVN stats dims do not match features")
    normalized = (features.data - mean) / np.maximum(std, STD_FLOOR)
    return FeatureMatrix(data=normalized, kind=features.kind,
                         n_static=features.n_static,
                         includes_deltas=features.includes_deltas)


def corpus_cmvn_stats(matrices) -> CmvnStats:
    """Pool frames of many utterances (in the given order) into one mean/std."""
    total = 0
    mean_acc = None
    sq_acc = None
    for fm in matrices:
        x = fm.data
        total += x.shape[0]
        mean_acc = x.sum(axis=0) if mean_acc is None else mean_acc + x.sum(axis=0)
        sq_acc = (x ** 2).sum(axis=0) if sq_acc is None else sq_acc + (x ** 2).sum(axis=0)
    if not total:
        raise FeatureError("no frames to accumulate CMVN stats from")
    mean = mean_acc / total
    var = sq_acc / total - mean ** 2
    return CmvnStats(mean=mean, std=np.sqrt(np.maximum(var, 0.0)))


# ---------------------------------------------------------------------------
# High-level extraction recipe shared by the CLI and the intervention runner.

@dataclass(frozen=True)
class FeatureRecipe:
    """Everything needed to turn a waveform into a persisted feature matrix."""

    kind: str = "lfcc"            # mfcc | imfcc | lfcc | scmc | cqcc | ltas
    window_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    n_filters: int = 20
    n_ceps: int = 20
    delta_width: int = 2
    with_deltas: bool = True
    cmvn_mode: str = "none"       # none | utterance
    cqcc_bins_per_octave: int = 96
    cqcc_octaves: int = 9
    cqcc_uniform_bins: int = 1024

    def stft_config(self, sample_rate: int) -> StftConfig:
        window = int(round(self.window_ms * sample_rate / 1000.0))
        hop = max(int(round(self.hop_ms * sample_rate / 1000.0)), 1)
        return StftConfig(window_length=window, hop=hop, fft_size=self.fft_size)


_BANK_FROM_KIND = {"mfcc": "mel", "imfcc": "inverted-mel", "lfcc": "linear",
                   "scmc": "mel"}


def compute_features(buffer, recipe: FeatureRecipe) -> FeatureMatrix:
    """Run the full recipe (spectral analysis, cepstra, deltas, CMVN)."""
    kind = recipe.kind
    if kind in _BANK_FROM_KIND:
        cfg = recipe.stft_config(buffer.sample_rate)
        mag = stft_magnitude(buffer, cfg)
        fb = make_filterbank(_BANK_FROM_KIND[kind], recipe.n_filters, cfg,
                             buffer.sample_rate)
        if kind == "scmc":
            feats = scmc(mag, fb, recipe.n_ceps)
        else:
            feats = filterbank_cepstra(mag, fb, recipe.n_ceps, kind=kind)
    elif kind == "cqcc":
        cfg = recipe.stft_config(buffer.sample_rate)
        cqt_cfg = CqtConfig.default_for(buffer.sample_rate, cfg.hop,
                                        bins_per_octave=recipe.cqcc_bins_per_octave,
                                        octaves=recipe.cqcc_octaves)
        mag = cqt_magnitude(buffer, cqt_cfg)
        feats = cqcc(mag, recipe.n_ceps, recipe.cqcc_uniform_bins,
                     bins_per_octave=recipe.cqcc_bins_per_octave)
    elif kind == "ltas":
        cfg = recipe.stft_config(buffer.sample_rate)
        vec = ltas(stft_magnitude(buffer, cfg))
        return FeatureMatrix(data=vec[None, :], kind="ltas")
    else:
        raise FeatureError(f"unknown feature kind '{kind}'")

    if recipe.with_deltas:
        feats = add_deltas(feats, recipe.delta_width)
    if recipe.cmvn_mode == "utterance":
        feats = cmvn(feats)
    elif recipe.cmvn_mode != "none":
        raise FeatureError(f"unknown cmvn mode '{recipe.cmvn_mode}'")
    return feats


# ---------------------------------------------------------------------------
# Feature-file container: fixed header + row-major little-endian float32.

_FEAT_MAGIC = b"CMFT"
_FEAT_VERSION = 1


def write_feature_file(path, fm: FeatureMatrix) -> None:
    kind_bytes = fm.tag.encode("utf-8")
    header = struct.pack(
        "<4sHB", _FEAT_MAGIC, _FEAT_VERSION, len(kind_bytes)
    ) + kind_bytes + struct.pack(
        "<IIIB", fm.n_frames, fm.dims, fm.n_static, int(fm.includes_deltas)
    )
    payload = np.ascontiguousarray(fm.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_feature_file(path) -> FeatureMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < 7 or raw[:4] != _FEAT_MAGIC:
        raise FeatureError(f"{path}: not a feature file")
    version, kind_len = struct.unpack_from("<HB", raw, 4)
    if version != _FEAT_VERSION:
        raise FeatureError(f"{path}: unsupported feature-file version {version}")
    off = 7
    tag = raw[off:off + kind_len].decode("utf-8")
    off += kind_len
    frames, dims, n_static, has_deltas = struct.unpack_from("<IIIB", raw, off)
    off += 13
    expected = frames * dims * 4
    if len(raw) - off != expected:
        raise FeatureError(f"{path}: truncated feature payload")
    data = np.frombuffer(raw, dtype="<f4", offset=off).reshape(frames, dims)
    kind = tag[:-4] if tag.endswith("+sda") else tag
    return FeatureMatrix(data=data.astype(np.float64), kind=kind,
                         n_static=n_static, includes_deltas=bool(has_deltas))


def write_feature_manifest(path, entries: dict[str, str]) -> None:
    """Persist the utterance_id -> feature path map, sorted for determinism."""
    lines = [f"{utt} {p}" for utt, p in sorted(entries.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_feature_manifest(path) -> dict[str, Path]:
    path = Path(path)
    out: dict[str, Path] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FeatureError(f"{path}:{ln}: expected 'utterance_id path'")
        utt, p = parts
        if utt in out:
            raise FeatureError(f"{path}:{ln}: duplicate utterance '{utt}'")
        fp = Path(p)
        out[utt] = fp if fp.is_absolute() else path.parent / fp
    return out
