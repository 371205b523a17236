"""Independent reference implementations used to check the package.

These deliberately take different algorithmic routes from the shipped code:
the EER oracle goes through pool-adjacent-violators isotonic regression
(scikit-learn) instead of a geometric hull, and the t-DCF oracle is an
exhaustive brute-force threshold sweep.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import nnls
from sklearn.isotonic import IsotonicRegression


def manual_dct2_ortho(x):
    """Direct cosine-sum DCT-II, the oracle for every cepstral op."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[-1]
    out = np.zeros_like(x)
    for j in range(m):
        scale = np.sqrt(1.0 / m) if j == 0 else np.sqrt(2.0 / m)
        out[..., j] = scale * np.sum(
            x * np.cos(np.pi * j * (2 * np.arange(m) + 1) / (2 * m)), axis=-1
        )
    return out


def equal_energy_frame(fb, level=np.e):
    """A magnitude frame whose filterbank energies all equal ``level``."""
    sol, residual = nnls(fb.matrix, np.full(fb.n_filters, level))
    assert residual < 1e-9
    return np.sqrt(sol)[None, :]


def candidate_thresholds(bona, spoof) -> np.ndarray:
    taus = np.unique(np.concatenate([bona, spoof]))
    return np.append(taus, taus.max() + 1.0)


def error_rates_at(bona, spoof, taus):
    """P_miss/P_fa by direct boolean counting (accept when score >= tau)."""
    bona = np.asarray(bona, dtype=np.float64)
    spoof = np.asarray(spoof, dtype=np.float64)
    p_miss = (bona[:, None] < taus[None, :]).sum(axis=0) / bona.size
    p_fa = (spoof[:, None] >= taus[None, :]).sum(axis=0) / spoof.size
    return p_miss, p_fa


def brute_force_min_tdcf(bona, spoof, c1: float, c2: float) -> float:
    taus = candidate_thresholds(np.asarray(bona), np.asarray(spoof))
    p_miss, p_fa = error_rates_at(bona, spoof, taus)
    return float(((c1 * p_miss + c2 * p_fa) / min(c1, c2)).min())


def pav_rocch_points(bona, spoof) -> np.ndarray:
    """ROC convex hull vertices via isotonic regression.

    Ties are pooled per distinct score; the fitted monotone class
    probability defines the hull blocks. Returns (P_fa, P_miss) rows from
    the accept-all corner (1, 0) to the reject-all corner (0, 1).
    """
    bona = np.asarray(bona, dtype=np.float64)
    spoof = np.asarray(spoof, dtype=np.float64)
    scores = np.unique(np.concatenate([bona, spoof]))
    n_bona = np.array([(bona == s).sum() for s in scores], dtype=np.float64)
    n_spoof = np.array([(spoof == s).sum() for s in scores], dtype=np.float64)
    weights = n_bona + n_spoof
    values = n_bona / weights
    fitted = IsotonicRegression(increasing=True).fit_transform(
        np.arange(scores.size), values, sample_weight=weights
    )
    # block boundaries where the fitted probability changes
    cuts = np.flatnonzero(np.diff(fitted) > 1e-12) + 1
    edges = np.concatenate([[0], cuts, [scores.size]])
    pts = [(1.0, 0.0)]
    cum_b = cum_s = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        cum_b += n_bona[lo:hi].sum()
        cum_s += n_spoof[lo:hi].sum()
        pts.append((1.0 - cum_s / spoof.size, cum_b / bona.size))
    return np.asarray(pts)


def pav_eer(bona, spoof) -> float:
    pts = pav_rocch_points(bona, spoof)
    diff = pts[:, 1] - pts[:, 0]  # P_miss - P_fa, increasing along the walk
    idx = int(np.searchsorted(diff, 0.0, side="left"))
    if diff[idx] == 0.0:
        return float(pts[idx, 1])
    i, j = idx - 1, idx
    t = -diff[i] / (diff[j] - diff[i])
    return float(pts[i, 1] + t * (pts[j, 1] - pts[i, 1]))
