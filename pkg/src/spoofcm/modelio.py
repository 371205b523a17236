"""Versioned binary containers for trained models.

Layout: magic, model-type tag, version, feature-kind tag, then model-type
specific little-endian float64 blocks. The feature-kind tag is checked at
score time to prevent model/feature mismatches.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .gmm import DiagGmm
from .ivector import SvmModel, TvModel

_MAGIC = b"CMMD"
_VERSION = 1


class ModelIOError(ValueError):
    """Corrupt or mismatched model file."""


def _pack_header(model_type: bytes, feature_kind: str) -> bytes:
    kind = feature_kind.encode("utf-8")
    return struct.pack("<4s4sHB", _MAGIC, model_type, _VERSION, len(kind)) + kind


def _unpack_header(raw: bytes, path):
    if len(raw) < 11 or raw[:4] != _MAGIC:
        raise ModelIOError(f"{path}: not a model file")
    model_type = raw[4:8]
    version, kind_len = struct.unpack_from("<HB", raw, 8)
    if version != _VERSION:
        raise ModelIOError(f"{path}: unsupported model version {version}")
    kind = raw[11:11 + kind_len].decode("utf-8")
    return model_type, kind, 11 + kind_len


def _f64(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_gmm(path, model: DiagGmm, feature_kind: str) -> None:
    k, d = model.n_components, model.dims
    blob = _pack_header(b"GMM\0", feature_kind)
    blob += struct.pack("<II", k, d)
    blob += _f64(model.weights) + _f64(model.means) + _f64(model.variances)
    Path(path).write_bytes(blob)


def load_gmm(path) -> tuple[DiagGmm, str]:
    raw = Path(path).read_bytes()
    model_type, kind, off = _unpack_header(raw, path)
    if model_type != b"GMM\0":
        raise ModelIOError(f"{path}: not a GMM model file")
    k, d = struct.unpack_from("<II", raw, off)
    off += 8
    expected = 8 * (k + 2 * k * d)
    if len(raw) - off != expected:
        raise ModelIOError(f"{path}: truncated GMM payload")
    weights = np.frombuffer(raw, dtype="<f8", count=k, offset=off)
    off += 8 * k
    means = np.frombuffer(raw, dtype="<f8", count=k * d, offset=off).reshape(k, d)
    off += 8 * k * d
    variances = np.frombuffer(raw, dtype="<f8", count=k * d, offset=off).reshape(k, d)
    model = DiagGmm(weights=weights.copy(), means=means.copy(),
                    variances=variances.copy())
    model.validate()
    return model, kind


def save_tv(path, model: TvModel, feature_kind: str) -> None:
    k, d, r = model.ubm.n_components, model.ubm.dims, model.rank
    blob = _pack_header(b"TVM\0", feature_kind)
    blob += struct.pack("<III", k, d, r)
    blob += _f64(model.ubm.weights) + _f64(model.ubm.means) + _f64(model.ubm.variances)
    blob += _f64(model.t)
    Path(path).write_bytes(blob)


def load_tv(path) -> tuple[TvModel, str]:
    raw = Path(path).read_bytes()
    model_type, kind, off = _unpack_header(raw, path)
    if model_type != b"TVM\0":
        raise ModelIOError(f"{path}: not a TV model file")
    k, d, r = struct.unpack_from("<III", raw, off)
    off += 12
    expected = 8 * (k + 2 * k * d + k * d * r)
    if len(raw) - off != expected:
        raise ModelIOError(f"{path}: truncated TV payload")
    weights = np.frombuffer(raw, dtype="<f8", count=k, offset=off).copy()
    off += 8 * k
    means = np.frombuffer(raw, dtype="<f8", count=k * d, offset=off).reshape(k, d).copy()
    off += 8 * k * d
    variances = np.frombuffer(raw, dtype="<f8", count=k * d, offset=off).reshape(k, d).copy()
    off += 8 * k * d
    t = np.frombuffer(raw, dtype="<f8", count=k * d * r, offset=off).reshape(k * d, r).copy()
    ubm = DiagGmm(weights=weights, means=means, variances=variances)
    ubm.validate()
    return TvModel(t=t, ubm=ubm), kind


def save_svm(path, model: SvmModel, feature_kind: str) -> None:
    dims = model.w.size
    blob = _pack_header(b"SVM\0", feature_kind)
    blob += struct.pack("<Id", dims, model.b)
    blob += _f64(model.w) + _f64(model.norm_mean) + _f64(model.norm_std)
    Path(path).write_bytes(blob)


def load_svm(path) -> tuple[SvmModel, str]:
    raw = Path(path).read_bytes()
    model_type, kind, off = _unpack_header(raw, path)
    if model_type != b"SVM\0":
        raise ModelIOError(f"{path}: not an SVM model file")
    dims, bias = struct.unpack_from("<Id", raw, off)
    off += 12
    expected = 8 * 3 * dims
    if len(raw) - off != expected:
        raise ModelIOError(f"{path}: truncated SVM payload")
    w = np.frombuffer(raw, dtype="<f8", count=dims, offset=off).copy()
    off += 8 * dims
    mean = np.frombuffer(raw, dtype="<f8", count=dims, offset=off).copy()
    off += 8 * dims
    std = np.frombuffer(raw, dtype="<f8", count=dims, offset=off).copy()
    return SvmModel(w=w, b=bias, norm_mean=mean, norm_std=std), kind
