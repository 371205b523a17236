"""i-vector front end (UBM stats, total-variability training, extraction)
and linear SVM scoring over fused utterance vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import DiagGmm, GmmError, _component_log_prob
from scipy.special import logsumexp


class IvectorError(ValueError):
    """Invalid i-vector/SVM input or configuration."""


@dataclass
class SuffStats:
    """Zeroth/first-order Baum-Welch statistics against a UBM."""

    n: np.ndarray          # (K,)
    f: np.ndarray          # (K, D), uncentered
    frame_count: int

    def validate(self) -> None:
        if abs(self.n.sum() - self.frame_count) > 1e-8 * max(self.frame_count, 1):
            raise IvectorError("zeroth-order stats do not sum to the frame count")
        if np.any(self.n < 0):
            raise IvectorError("negative occupancy")


def baum_welch_stats(ubm: DiagGmm, features) -> SuffStats:
    """Accumulate N_k = sum_t gamma_t(k) and F_k = sum_t gamma_t(k) x_t."""
    frames = features.data if hasattr(features, "data") else np.asarray(features)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise IvectorError("empty feature matrix")
    if frames.shape[1] != ubm.dims:
        raise IvectorError("feature dims do not match the UBM")
    log_p = _component_log_prob(ubm, frames)
    gamma = np.exp(log_p - logsumexp(log_p, axis=1)[:, None])
    stats = SuffStats(n=gamma.sum(axis=0), f=gamma.T @ frames,
                      frame_count=frames.shape[0])
    stats.validate()
    return stats


@dataclass
class TvModel:
    """Total-variability subspace over a UBM supervector space."""

    t: np.ndarray          # (K*D, R)
    ubm: DiagGmm

    @property
    def rank(self) -> int:
        return self.t.shape[1]


def _centered_flat(stats: SuffStats, ubm: DiagGmm) -> np.ndarray:
    return (stats.f - stats.n[:, None] * ubm.means).ravel()


def _posterior(t: np.ndarray, ubm: DiagGmm, stats: SuffStats):
    """Posterior (mean, covariance, natural-parameter b, logdet precision)
    of the latent factor given one utterance's statistics."""
    rank = t.shape[1]
    inv_var = (1.0 / ubm.variances).ravel()
    n_rep = np.repeat(stats.n, ubm.dims)
    precision = np.eye(rank) + t.T @ (t * (n_rep * inv_var)[:, None])
    b = t.T @ (_centered_flat(stats, ubm) * inv_var)
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise IvectorError("singular posterior precision") from exc
    cov = np.linalg.inv(precision)
    mean = cov @ b
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return mean, cov, b, logdet


def extract_ivector(tv: TvModel, stats: SuffStats) -> np.ndarray:
    """Posterior mean of the latent factor for one utterance."""
    if stats.f.shape != (tv.ubm.n_components, tv.ubm.dims):
        raise IvectorError("stats shape does not match the TV model's UBM")
    mean, _, _, _ = _posterior(tv.t, tv.ubm, stats)
    return mean


def train_tv(stats_list, ubm: DiagGmm, rank: int, iters: int = 10,
             seed: int = 0) -> tuple[TvModel, list[float]]:
    """EM for the factor-analysis model M = m_ubm + T w, w ~ N(0, I).

    Returns the model and a per-iteration trace of the marginal
    log-likelihood (up to an additive constant fixed by the statistics);
    the trace is non-decreasing.
    """
    stats_list = list(stats_list)
    if len(stats_list) < 2:
        raise IvectorError("need at least 2 utterances to train T")
    k, d = ubm.n_components, ubm.dims
    if rank < 1 or rank > k * d:
        raise IvectorError(f"rank must be in [1, {k * d}]")
    rng = np.random.default_rng(seed)
    scale = 0.1 * float(np.sqrt(ubm.variances).mean())
    t = rng.standard_normal((k * d, rank)) * scale

    inv_var = (1.0 / ubm.variances).ravel()
    centered = [_centered_flat(s, ubm) for s in stats_list]

    trace: list[float] = []
    for _ in range(iters):
        a = np.zeros((k, rank, rank))
        c = np.zeros((k * d, rank))
        ll = 0.0
        for s, fbar in zip(stats_list, centered):
            mean, cov, b, logdet = _posterior(t, ubm, s)
            second = cov + np.outer(mean, mean)
            a += s.n[:, None, None] * second[None, :, :]
            c += np.outer(fbar * inv_var, mean)
            ll += 0.5 * (b @ mean - logdet)
        trace.append(float(ll))
        for comp in range(k):
            rows = slice(comp * d, (comp + 1) * d)
            t[rows] = np.linalg.solve(a[comp], c[rows].T).T
    model = TvModel(t=t, ubm=ubm)
    if not np.all(np.isfinite(t)):
        raise IvectorError("non-finite T matrix after training")
    return model, trace


def fuse_ivectors(vectors) -> np.ndarray:
    """Concatenate per-extractor i-vectors in the configured order."""
    vectors = list(vectors)
    if not vectors:
        raise IvectorError("no i-vectors to fuse")
    return np.concatenate([np.asarray(v, dtype=np.float64).ravel() for v in vectors])


# ---------------------------------------------------------------------------
# Linear SVM on mean-variance normalized vectors.

@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    norm_mean: np.ndarray
    norm_std: np.ndarray

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.norm_mean) / self.norm_std


def _svm_objective(w, b, x, y, c) -> float:
    margins = 1.0 - y * (x @ w + b)
    return 0.5 * float(w @ w) + c * float(np.maximum(margins, 0.0).sum())


def train_linear_svm(x, y, c: float = 1.0, epochs: int = 200,
                     seed: int = 0) -> tuple[SvmModel, list[float]]:
    """Hinge-loss linear SVM by seeded-shuffle subgradient descent.

    Rows are mean-variance normalized first (stats stored on the model).
    Each epoch's update is accepted only if the full objective did not
    increase; otherwise it is rolled back and the step halved, so the
    returned objective trace is non-increasing. Labels are +-1 with
    bonafide = +1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise IvectorError("x rows and y labels disagree")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise IvectorError("both classes required to train an SVM")
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), 1e-8)
    xn = (x - mean) / std

    n = xn.shape[0]
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    step = 1.0 / (c * n)
    trace = [_svm_objective(w, b, xn, y, c)]
    for _ in range(epochs):
        w_prev, b_prev = w.copy(), b
        order = rng.permutation(n)
        for i in order:
            margin = y[i] * (xn[i] @ w + b)
            grad_w = w / n
            grad_b = 0.0
            if margin < 1.0:
                grad_w = grad_w - c * y[i] * xn[i]
                grad_b = -c * y[i]
            w = w - step * grad_w
            b = b - step * grad_b
        obj = _svm_objective(w, b, xn, y, c)
        if obj <= trace[-1]:
            trace.append(obj)
        else:
            w, b = w_prev, b_prev
            step *= 0.5
            trace.append(trace[-1])
    model = SvmModel(w=w, b=float(b), norm_mean=mean, norm_std=std)
    return model, trace


def svm_score(model: SvmModel, x) -> float:
    """Signed distance-like decision value; higher means bonafide."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != model.w.size:
        raise IvectorError(
            f"vector dims {x.size} do not match the SVM ({model.w.size})"
        )
    return float(model.w @ model.normalize(x) + model.b)
