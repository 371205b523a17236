import numpy as np
import pytest

from spoofcm.metrics import (CostModel, MetricError, ScoreSet, compute_eer,
                             compute_min_tdcf, detection_sweep,
                             tdcf_coefficients)

from oracles import brute_force_min_tdcf, pav_eer

RNG = np.random.default_rng(7)


def dyadic_scoreset(rng, n_lo=5, n_hi=200):
    """Scores on a k/16 grid: ties happen and monotone maps stay exact."""
    nb = int(rng.integers(n_lo, n_hi + 1))
    ns = int(rng.integers(n_lo, n_hi + 1))
    bona = rng.integers(-320, 320, nb) / 16.0 + 2.0
    spoof = rng.integers(-320, 320, ns) / 16.0
    return ScoreSet(bona, spoof)


class TestEer:
    def test_perfect_separation(self):
        eer, _ = compute_eer(ScoreSet([2, 3], [0, 1]))
        assert eer == 0.0

    def test_identical_distributions(self):
        eer, _ = compute_eer(ScoreSet([0.0, 1.0], [0.0, 1.0]))
        assert eer == 0.5

    def test_interpolated_crossing(self):
        # the crossing sits between attainable operating points
        eer, thr = compute_eer(ScoreSet([2, 3], [1, 2.5]))
        assert eer == pytest.approx(0.25, abs=1e-12)
        assert 1 <= thr <= 3

    def test_empty_class_rejected(self):
        with pytest.raises(MetricError):
            ScoreSet([], [1.0])

    def test_matches_pav_oracle(self):
        for _ in range(60):
            s = dyadic_scoreset(RNG)
            eer, _ = compute_eer(s)
            assert eer == pytest.approx(
                pav_eer(s.bonafide_scores, s.spoof_scores), abs=1e-10)

    def test_bounds(self):
        for _ in range(30):
            s = dyadic_scoreset(RNG)
            eer, _ = compute_eer(s)
            assert 0.0 <= eer <= 1.0

    def test_duplicate_bonafide_step_bound(self):
        """Duplicating one bonafide score moves the EER by at most 1/N_b."""
        for _ in range(40):
            s = dyadic_scoreset(RNG, 5, 60)
            eer, _ = compute_eer(s)
            dup = np.append(s.bonafide_scores, s.bonafide_scores[0])
            eer2, _ = compute_eer(ScoreSet(dup, s.spoof_scores))
            assert abs(eer2 - eer) <= 1.0 / s.bonafide_scores.size + 1e-12


class TestIncreasingTransformInvariance:
    TRANSFORMS = [
        lambda x: 2.0 * x + 3.0,
        lambda x: x / 4.0 - 5.0,
        lambda x: x ** 3,
    ]

    def test_exact_invariance(self):
        cost = CostModel()
        for case in range(34):
            s = dyadic_scoreset(RNG, 5, 80)
            eer, _ = compute_eer(s)
            tdcf, _ = compute_min_tdcf(s, cost)
            for f in self.TRANSFORMS:
                s2 = ScoreSet(f(s.bonafide_scores), f(s.spoof_scores))
                assert compute_eer(s2)[0] == eer
                assert compute_min_tdcf(s2, cost)[0] == tdcf


class TestTdcfCoefficients:
    def test_degenerate_spoof_prior(self):
        cm = CostModel(pi_tar=0.95, pi_non=0.05, pi_spoof=0.0)
        with pytest.raises(MetricError, match="C2"):
            tdcf_coefficients(cm)

    def test_perfect_asv_reduction(self):
        cm = CostModel(p_miss_asv=0.0, p_fa_asv=0.0)
        c1, _ = tdcf_coefficients(cm)
        assert c1 == pytest.approx(cm.pi_tar * cm.c_miss_cm, abs=1e-15)

    def test_shipped_default_is_positive(self):
        c1, c2 = tdcf_coefficients(CostModel())
        assert c1 > 0 and c2 > 0 and np.isfinite(c1) and np.isfinite(c2)

    def test_bad_priors_rejected(self):
        with pytest.raises(MetricError, match="simplex"):
            tdcf_coefficients(CostModel(pi_tar=0.9, pi_non=0.2, pi_spoof=0.05))


class TestMinTdcf:
    COST = CostModel()

    def test_perfect_separation_is_zero(self):
        tdcf, _ = compute_min_tdcf(ScoreSet([5, 6], [1, 2]), self.COST)
        assert tdcf == 0.0

    def test_always_in_unit_interval(self):
        for _ in range(40):
            s = dyadic_scoreset(RNG)
            tdcf, _ = compute_min_tdcf(s, self.COST)
            assert 0.0 <= tdcf <= 1.0

    def test_matches_brute_force(self):
        c1, c2 = tdcf_coefficients(self.COST)
        for _ in range(60):
            s = dyadic_scoreset(RNG, 5, 50)
            tdcf, _ = compute_min_tdcf(s, self.COST)
            ref = brute_force_min_tdcf(s.bonafide_scores, s.spoof_scores, c1, c2)
            assert tdcf == pytest.approx(ref, abs=1e-12)


def test_sweep_has_both_dummy_endpoints():
    s = ScoreSet([0.5, 1.5, 0.5], [-1.0, 0.25])
    taus, p_miss, p_fa = detection_sweep(s)
    assert p_miss[0] == 0.0 and p_fa[0] == 1.0    # accept everything
    assert p_miss[-1] == 1.0 and p_fa[-1] == 0.0  # reject everything
    assert np.all(np.diff(taus) > 0)
    assert np.all(np.diff(p_miss) >= 0) and np.all(np.diff(p_fa) <= 0)
