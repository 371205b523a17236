"""Countermeasure evaluation: EER and minimum normalized tandem cost.

Threshold convention everywhere: a trial is accepted as bonafide when its
score is >= the threshold, so P_miss(t) is the fraction of bonafide scores
below t and P_fa(t) the fraction of spoof scores at or above t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRIOR_TOL = 1e-10


class MetricError(ValueError):
    """Invalid metric input (empty class, bad cost model, ...)."""


@dataclass(frozen=True)
class CostModel:
    """t-DCF priors, costs and the fixed ASV operating point.

    Priors and costs default to the ASVspoof 2019 evaluation constants.
    The three ASV error rates describe the tandem ASV system at its chosen
    threshold; they are deployment inputs, and the shipped values are
    overridable placeholders.
    """

    pi_tar: float = 0.9405
    pi_non: float = 0.0095
    pi_spoof: float = 0.05
    c_miss_asv: float = 1.0
    c_fa_asv: float = 10.0
    c_miss_cm: float = 1.0
    c_fa_cm: float = 10.0
    p_miss_asv: float = 0.05
    p_fa_asv: float = 0.05
    p_miss_spoof_asv: float = 0.05

    def validate(self) -> None:
        priors = (self.pi_tar, self.pi_non, self.pi_spoof)
        if abs(sum(priors) - 1.0) > PRIOR_TOL or min(priors) < 0:
            raise MetricError("priors must lie on the simplex")
        for name in ("c_miss_asv", "c_fa_asv", "c_miss_cm", "c_fa_cm"):
            if getattr(self, name) <= 0:
                raise MetricError(f"{name} must be positive")
        for name in ("p_miss_asv", "p_fa_asv", "p_miss_spoof_asv"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise MetricError(f"{name} must be in [0, 1]")

    def describe(self) -> str:
        return " ".join(f"{k}={getattr(self, k)}" for k in (
            "pi_tar", "pi_non", "pi_spoof", "c_miss_asv", "c_fa_asv",
            "c_miss_cm", "c_fa_cm", "p_miss_asv", "p_fa_asv",
            "p_miss_spoof_asv"))


@dataclass
class ScoreSet:
    bonafide_scores: np.ndarray
    spoof_scores: np.ndarray

    def __post_init__(self):
        self.bonafide_scores = np.asarray(self.bonafide_scores, dtype=np.float64)
        self.spoof_scores = np.asarray(self.spoof_scores, dtype=np.float64)
        if self.bonafide_scores.size == 0 or self.spoof_scores.size == 0:
            raise MetricError("both score classes must be non-empty")
        if not (np.all(np.isfinite(self.bonafide_scores))
                and np.all(np.isfinite(self.spoof_scores))):
            raise MetricError("non-finite scores")


def detection_sweep(s: ScoreSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Error rates at every distinct score plus a reject-all sentinel.

    Returns (thresholds, p_miss, p_fa). The first threshold (the global
    minimum score) is the accept-all operating point (0, 1); the sentinel
    past the maximum is reject-all (1, 0).
    """
    bona = np.sort(s.bonafide_scores)
    spoof = np.sort(s.spoof_scores)
    taus = np.unique(np.concatenate([bona, spoof]))
    taus = np.append(taus, taus[-1] + 1.0)
    p_miss = np.searchsorted(bona, taus, side="left") / bona.size
    p_fa = (spoof.size - np.searchsorted(spoof, taus, side="left")) / spoof.size
    return taus, p_miss, p_fa


def _lower_hull(points: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of (x, y) points sorted by x then y."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    hull: list[int] = []
    for i in order:
        while len(hull) >= 2:
            o, a = points[hull[-2]], points[hull[-1]]
            b = points[i]
            cross = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull)


def compute_eer(s: ScoreSet) -> tuple[float, float]:
    """Equal error rate on the ROC convex hull, with its threshold.

    The empirical (P_fa, P_miss) step points are reduced to their convex
    hull and the EER read off where the hull crosses P_miss = P_fa, which
    linearly interpolates between adjacent attainable operating points.
    """
    taus, p_miss, p_fa = detection_sweep(s)
    pts = np.column_stack([p_fa, p_miss])
    hull = _lower_hull(pts)
    hx, hy, ht = p_fa[hull], p_miss[hull], taus[hull]
    diff = hy - hx  # strictly decreasing along the hull
    if diff[0] <= 0.0:
        return float(max(hy[0], 0.0)), float(ht[0])
    idx = int(np.searchsorted(-diff, 0.0, side="left"))
    if idx >= diff.size:
        idx = diff.size - 1
    if diff[idx] == 0.0:
        return float(hy[idx]), float(ht[idx])
    i, j = idx - 1, idx
    t = diff[i] / (diff[i] - diff[j])
    eer = hy[i] + t * (hy[j] - hy[i])
    threshold = ht[i] + t * (ht[j] - ht[i])
    return float(eer), float(threshold)


def tdcf_coefficients(cm_cost: CostModel) -> tuple[float, float]:
    """Constants weighting CM miss and false-alarm rates in the tandem cost.

    C1 = pi_tar*(C_miss_cm - C_miss_asv*P_miss_asv) - pi_non*C_fa_asv*P_fa_asv
    C2 = C_fa_cm*pi_spoof*(1 - P_miss_spoof_asv)

    Both must be positive for the normalized cost to make sense; otherwise
    the ASV operating point is rejected.
    """
    cm_cost.validate()
    c1 = cm_cost.pi_tar * (cm_cost.c_miss_cm
                           - cm_cost.c_miss_asv * cm_cost.p_miss_asv) \
        - cm_cost.pi_non * cm_cost.c_fa_asv * cm_cost.p_fa_asv
    c2 = cm_cost.c_fa_cm * cm_cost.pi_spoof * (1.0 - cm_cost.p_miss_spoof_asv)
    if c1 <= 0 or c2 <= 0:
        raise MetricError(
            f"invalid ASV operating point for normalized t-DCF (C1={c1:.6g}, "
            f"C2={c2:.6g} must both be positive)"
        )
    return float(c1), float(c2)


def compute_min_tdcf(s: ScoreSet, cost: CostModel) -> tuple[float, float]:
    """Minimum normalized t-DCF over the detection sweep, with its threshold.

    Normalization is by min(C1, C2), the better of the accept-all and
    reject-all dummy countermeasures, so the result lies in [0, 1].
    """
    c1, c2 = tdcf_coefficients(cost)
    taus, p_miss, p_fa = detection_sweep(s)
    costs = (c1 * p_miss + c2 * p_fa) / min(c1, c2)
    idx = int(costs.argmin())
    return float(costs[idx]), float(taus[idx])
