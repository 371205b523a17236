"""Prior-weighted logistic-regression score fusion and calibration.

Fuses per-model score columns into a single calibrated score s = alpha.x +
beta by minimizing the class-balanced logistic loss at an effective target
prior. Works over any score sources, including externally produced score
files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FusionError(ValueError):
    """Invalid fusion input or model mismatch."""


# Ensemble presets: ordered model ids fused in the published configurations.
ENSEMBLE_PRESETS = {
    "la-e1": ["A", "C", "D", "E", "F", "G", "I"],
    "la-e2": ["A", "B", "G"],
    "la-e3": ["A", "B"],
    "pa-e1": ["A", "B", "C", "E", "F", "G", "H", "I", "J"],
    "pa-e2": ["A", "B", "C", "D", "E"],
    "pa-e3": ["A", "B"],
}


@dataclass
class FusionModel:
    alphas: np.ndarray
    beta: float
    input_ids: tuple[str, ...]

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        if len(set(self.input_ids)) != len(self.input_ids):
            raise FusionError("input_ids must be unique")
        if self.alphas.size != len(self.input_ids):
            raise FusionError("one alpha per input id required")


def _softplus(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z > 30.0
    neg = z < -30.0
    mid = ~(pos | neg)
    out[pos] = z[pos]
    out[neg] = np.exp(z[neg])
    out[mid] = np.log1p(np.exp(z[mid]))
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fusion_loss(alphas, beta, scores, is_bonafide, prior: float):
    """Prior-weighted logistic loss and its gradient in (alphas, beta).

    L = (pi/N_b) sum_bona softplus(-(s + logit pi))
      + ((1-pi)/N_s) sum_spoof softplus(s + logit pi)
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    is_bonafide = np.asarray(is_bonafide, dtype=bool)
    n_b = int(is_bonafide.sum())
    n_s = int((~is_bonafide).sum())
    logit_prior = math.log(prior / (1.0 - prior))
    z = scores @ alphas + beta + logit_prior

    w = np.where(is_bonafide, prior / n_b, (1.0 - prior) / n_s)
    sign = np.where(is_bonafide, -1.0, 1.0)
    loss = float((w * _softplus(sign * z)).sum())
    dz = w * sign * _sigmoid(sign * z)
    grad_alpha = scores.T @ dz
    grad_beta = float(dz.sum())
    return loss, grad_alpha, grad_beta


def train_fusion(scores, labels, prior: float = 0.5, input_ids=None,
                 max_iters: int = 2000, grad_tol: float = 1e-12) -> FusionModel:
    """Fit fusion weights by gradient descent with backtracking line search.

    Starts from zero and only accepts descending steps, so the returned loss
    never exceeds the zero-init loss. Deterministic; the objective is convex
    so the iteration budget controls accuracy only.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] < 1:
        raise FusionError("need a utterances x models score matrix")
    if not np.all(np.isfinite(scores)):
        raise FusionError("NaN or infinite scores")
    is_bonafide = np.asarray(labels, dtype=bool)
    if is_bonafide.size != scores.shape[0]:
        raise FusionError("one label per score row required")
    if is_bonafide.all() or not is_bonafide.any():
        raise FusionError("both classes required to train fusion")
    if not 0.0 < prior < 1.0:
        raise FusionError("prior must be in (0, 1)")
    if input_ids is None:
        input_ids = tuple(f"m{i}" for i in range(scores.shape[1]))
    input_ids = tuple(input_ids)
    if len(input_ids) != scores.shape[1]:
        raise FusionError("one input id per score column required")

    alphas = np.zeros(scores.shape[1])
    beta = 0.0
    loss, g_a, g_b = fusion_loss(alphas, beta, scores, is_bonafide, prior)
    step = 1.0
    for _ in range(max_iters):
        g_norm2 = float(g_a @ g_a) + g_b * g_b
        if g_norm2 <= grad_tol ** 2:
            break
        while True:
            cand_a = alphas - step * g_a
            cand_b = beta - step * g_b
            cand_loss, cand_ga, cand_gb = fusion_loss(cand_a, cand_b, scores,
                                                      is_bonafide, prior)
            if cand_loss <= loss - 1e-4 * step * g_norm2:
                break
            step *= 0.5
            if step < 1e-16:
                break
        if step < 1e-16:
            break
        alphas, beta = cand_a, cand_b
        loss, g_a, g_b = cand_loss, cand_ga, cand_gb
        step *= 2.0
    return FusionModel(alphas=alphas, beta=float(beta), input_ids=input_ids)


def apply_fusion(model: FusionModel, scores, input_ids=None) -> np.ndarray:
    """alpha . x + beta for one row or a matrix of rows.

    If ``input_ids`` is given it must be a permutation of the model's ids;
    columns are reordered accordingly before fusing.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if scores.shape[1] != len(model.input_ids):
        raise FusionError(
            f"got {scores.shape[1]} score columns for {len(model.input_ids)} inputs"
        )
    if input_ids is not None:
        input_ids = tuple(input_ids)
        if sorted(input_ids) != sorted(model.input_ids):
            raise FusionError("input ids do not match the fusion model")
        perm = [input_ids.index(mid) for mid in model.input_ids]
        scores = scores[:, perm]
    fused = scores @ model.alphas + model.beta
    return fused if fused.size > 1 else float(fused[0])


def save_fusion(path, model: FusionModel) -> None:
    lines = ["FUSIONv1", f"beta {float(model.beta)!r}"]
    lines += [f"{mid} {float(a)!r}" for mid, a in zip(model.input_ids, model.alphas)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_fusion(path) -> FusionModel:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "FUSIONv1":
        raise FusionError(f"{path}: not a fusion model file")
    beta = None
    ids, alphas = [], []
    for line in lines[1:]:
        name, value = line.split()
        if name == "beta":
            beta = float(value)
        else:
            ids.append(name)
            alphas.append(float(value))
    if beta is None or not ids:
        raise FusionError(f"{path}: incomplete fusion model")
    return FusionModel(alphas=np.asarray(alphas), beta=beta, input_ids=tuple(ids))
