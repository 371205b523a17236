"""Diagonal-covariance Gaussian mixture class models.

One GMM is trained per class (bonafide, spoof) on pooled frames; test
utterances are scored by the average frame log-likelihood ratio between the
two models.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

WEIGHT_TOL = 1e-10


class GmmError(ValueError):
    """Invalid GMM input or configuration."""


@dataclass
class DiagGmm:
    weights: np.ndarray    # (K,), on the simplex
    means: np.ndarray      # (K, D)
    variances: np.ndarray  # (K, D), positive

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dims(self) -> int:
        return self.means.shape[1]

    def validate(self) -> None:
        if abs(self.weights.sum() - 1.0) > WEIGHT_TOL:
            raise GmmError("weights do not sum to 1")
        if np.any(self.weights < 0):
            raise GmmError("negative mixture weight")
        if np.any(self.variances <= 0):
            raise GmmError("non-positive variance")
        for arr in (self.weights, self.means, self.variances):
            if not np.all(np.isfinite(arr)):
                raise GmmError("non-finite GMM parameter")


@dataclass(frozen=True)
class EmConfig:
    """EM schedule. ``variance_floor`` is a fraction of the global
    per-dimension data variance, not an absolute value."""

    max_iters: int = 50
    rel_tol: float = 1e-5
    variance_floor: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise GmmError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise GmmError("rel_tol must be positive")


def _floor_vector(frames: np.ndarray, fraction: float) -> np.ndarray:
    return np.maximum(fraction * frames.var(axis=0), 1e-12)


def _component_log_prob(model: DiagGmm, frames: np.ndarray) -> np.ndarray:
    """log w_k + log N(x_t; mu_k, diag sigma2_k), shape (N, K)."""
    inv_var = 1.0 / model.variances
    const = -0.5 * (model.dims * np.log(2.0 * np.pi)
                    + np.log(model.variances).sum(axis=1))
    quad = (frames ** 2) @ inv_var.T - 2.0 * frames @ (model.means * inv_var).T \
        + (model.means ** 2 * inv_var).sum(axis=1)[None, :]
    return np.log(model.weights)[None, :] + const[None, :] - 0.5 * quad


def kmeans_init(frames: np.ndarray, n_components: int, seed: int,
                variance_floor: float = 1e-3, max_lloyd_iters: int = 100) -> DiagGmm:
    """Seed a GMM with k-means++ centers refined by Lloyd iterations.

    Weights are cluster proportions and variances the within-cluster
    diagonal variances (floored). Deterministic given the seed.
    """
    frames = np.asarray(frames, dtype=np.float64)
    n, d = frames.shape
    if n < n_components:
        raise GmmError(f"{n} frames cannot seed {n_components} components")
    rng = np.random.default_rng(seed)
    floor = _floor_vector(frames, variance_floor)

    if np.allclose(frames, frames[0]):
        warnings.warn("all frames identical; k-means init degenerates to one cluster")
        centers = np.tile(frames[0], (n_components, 1))
        return DiagGmm(weights=np.full(n_components, 1.0 / n_components),
                       means=centers,
                       variances=np.tile(floor, (n_components, 1)))

    # k-means++ seeding
    centers = np.empty((n_components, d))
    centers[0] = frames[rng.integers(n)]
    d2 = ((frames - centers[0]) ** 2).sum(axis=1)
    for k in range(1, n_components):
        total = d2.sum()
        if total <= 0:
            centers[k:] = frames[rng.integers(n, size=n_components - k)]
            break
        probs = d2 / total
        centers[k] = frames[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((frames - centers[k]) ** 2).sum(axis=1))

    assign = np.zeros(n, dtype=int)
    for _ in range(max_lloyd_iters):
        dist = ((frames[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2) \
            if n * n_components * d <= 2_000_000 else None
        if dist is None:
            # matmul form for large problems
            dist = (frames ** 2).sum(axis=1)[:, None] \
                - 2.0 * frames @ centers.T + (centers ** 2).sum(axis=1)[None, :]
        new_assign = dist.argmin(axis=1)
        for k in range(n_components):
            members = frames[new_assign == k]
            if members.size == 0:
                # revive with the point farthest from its center
                far = dist.min(axis=1).argmax()
                centers[k] = frames[far]
                new_assign[far] = k
            else:
                centers[k] = members.mean(axis=0)
        if np.array_equal(new_assign, assign):
            assign = new_assign
            break
        assign = new_assign

    weights = np.bincount(assign, minlength=n_components).astype(np.float64)
    weights /= weights.sum()
    variances = np.empty((n_components, d))
    for k in range(n_components):
        members = frames[assign == k]
        variances[k] = members.var(axis=0) if members.shape[0] > 0 else floor
    variances = np.maximum(variances, floor)
    model = DiagGmm(weights=weights, means=centers, variances=variances)
    model.validate()
    return model


def em_fit(frames: np.ndarray, init: DiagGmm,
           cfg: EmConfig) -> tuple[DiagGmm, list[float]]:
    """Fit by EM in log space; returns the model and the per-iteration
    total log-likelihood trace (non-decreasing up to floor effects)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != init.dims:
        raise GmmError("frame dims do not match the initial model")
    floor = _floor_vector(frames, cfg.variance_floor)

    model = DiagGmm(weights=init.weights.copy(), means=init.means.copy(),
                    variances=np.maximum(init.variances, floor))
    trace: list[float] = []
    for _ in range(cfg.max_iters):
        log_p = _component_log_prob(model, frames)
        frame_ll = logsumexp(log_p, axis=1)
        total_ll = float(frame_ll.sum())
        if not np.isfinite(total_ll):
            raise GmmError("non-finite log-likelihood during EM")
        gamma = np.exp(log_p - frame_ll[:, None])

        nk = np.maximum(gamma.sum(axis=0), 1e-10)
        weights = nk / nk.sum()
        means = (gamma.T @ frames) / nk[:, None]
        sq = (gamma.T @ (frames ** 2)) / nk[:, None]
        variances = np.maximum(sq - means ** 2, floor)
        model = DiagGmm(weights=weights, means=means, variances=variances)
        model.validate()

        trace.append(total_ll)
        if len(trace) >= 2:
            prev = trace[-2]
            if abs(total_ll - prev) < cfg.rel_tol * abs(prev):
                break
    return model, trace


def avg_loglik(model: DiagGmm, features) -> float:
    """Mean over frames of the mixture log-density, via log-sum-exp."""
    frames = features.data if hasattr(features, "data") else np.asarray(features)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise GmmError("features must be 2-D")
    if frames.shape[0] == 0:
        raise GmmError("empty feature matrix")
    if frames.shape[1] != model.dims:
        raise GmmError(
            f"feature dims {frames.shape[1]} do not match model dims {model.dims}"
        )
    return float(logsumexp(_component_log_prob(model, frames), axis=1).mean())


def llr_score(bonafide: DiagGmm, spoof: DiagGmm, features) -> float:
    """Average log-likelihood ratio; higher means more bonafide-like."""
    return avg_loglik(bonafide, features) - avg_loglik(spoof, features)
