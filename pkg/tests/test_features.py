import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import equal_energy_frame, manual_dct2_ortho

from spoofcm.audio import AudioBuffer
from spoofcm.features import (CmvnStats, CqtConfig, FeatureError,
                              FeatureMatrix, FeatureRecipe, StftConfig,
                              add_deltas, cmvn, compute_features,
                              corpus_cmvn_stats, cqcc, cqt_magnitude,
                              filterbank_cepstra, hz_to_mel, ltas,
                              make_filterbank, mel_to_hz,
                              read_feature_file, read_feature_manifest,
                              resample_to_uniform, scmc, stft_magnitude,
                              write_feature_file, write_feature_manifest)

RNG = np.random.default_rng(20240901)
SR = 16000
CFG = StftConfig(window_length=400, hop=160, fft_size=512)


class TestStft:
    def test_all_zero_buffer(self):
        buf = AudioBuffer(np.zeros(1000), SR)
        assert np.all(stft_magnitude(buf, CFG) == 0.0)

    def test_frame_count_formula(self):
        buf = AudioBuffer(RNG.normal(0, 0.1, 1504), SR)
        mag = stft_magnitude(buf, StftConfig(1024, 160, 1024))
        assert mag.shape == (4, 513)

    def test_too_short_errors(self):
        with pytest.raises(FeatureError, match="shorter"):
            stft_magnitude(AudioBuffer(np.zeros(100), SR), CFG)

    def test_sinusoid_peaks_at_its_bin(self):
        bin_freq = 50 * SR / CFG.fft_size
        t = np.arange(4000) / SR
        buf = AudioBuffer(0.4 * np.sin(2 * np.pi * bin_freq * t), SR)
        mag = stft_magnitude(buf, CFG)
        assert np.all(mag.argmax(axis=1) == 50)

    def test_matches_direct_dft(self):
        """Direct complex-exponential DFT oracle on a couple of frames."""
        buf = AudioBuffer(RNG.normal(0, 0.2, 900), SR)
        mag = stft_magnitude(buf, CFG)
        win = np.hamming(CFG.window_length)
        for t in range(mag.shape[0]):
            seg = np.zeros(CFG.fft_size)
            seg[:CFG.window_length] = buf.samples[t * CFG.hop:
                                                  t * CFG.hop + 400] * win
            n = np.arange(CFG.fft_size)
            for b in [0, 17, 256]:
                ref = abs(np.sum(seg * np.exp(-2j * np.pi * b * n / CFG.fft_size)))
                assert mag[t, b] == pytest.approx(ref, abs=1e-9)


class TestFilterbank:
    def test_linear_two_filters(self):
        fb = make_filterbank("linear", 2, StftConfig(8, 4, 8), 16)
        assert fb.matrix.shape == (2, 5)
        assert np.allclose(fb.center_freqs, [8 / 3, 16 / 3])
        # symmetric coverage of the Nyquist range
        assert np.allclose(fb.matrix[0], fb.matrix[1][::-1])

    def test_inverted_mel_is_flipped_mel(self):
        mel = make_filterbank("mel", 20, CFG, SR)
        imel = make_filterbank("inverted-mel", 20, CFG, SR)
        assert np.array_equal(imel.matrix, mel.matrix[::-1, ::-1])

    def test_mel_centers_closed_form(self):
        n = 20
        fb = make_filterbank("mel", n, CFG, SR)
        edges = np.linspace(hz_to_mel(0.0), hz_to_mel(SR / 2), n + 2)
        assert np.allclose(fb.center_freqs, mel_to_hz(edges[1:-1]), atol=1e-9)

    def test_centers_strictly_increasing(self):
        for kind in ("mel", "linear", "inverted-mel"):
            fb = make_filterbank(kind, 20, CFG, SR)
            assert np.all(np.diff(fb.center_freqs) > 0)

    def test_too_many_filters_error(self):
        with pytest.raises(FeatureError, match="empty filter"):
            make_filterbank("mel", 120, StftConfig(64, 32, 64), SR)

    def test_every_filter_nonempty(self):
        fb = make_filterbank("mel", 20, CFG, SR)
        assert np.all((fb.matrix > 0).any(axis=1))


class TestCepstra:
    @pytest.mark.parametrize("kind", ["mel", "inverted-mel", "linear"])
    def test_equal_energies_give_only_c0(self, kind):
        fb = make_filterbank(kind, 20, CFG, SR)
        feats = filterbank_cepstra(equal_energy_frame(fb), fb, 20)
        assert abs(feats.data[0, 0]) > 1e-6
        assert np.max(np.abs(feats.data[0, 1:])) < 1e-7

    def test_zero_frame_is_floored_and_finite(self):
        fb = make_filterbank("mel", 20, CFG, SR)
        feats = filterbank_cepstra(np.zeros((2, CFG.n_bins)), fb, 20)
        assert np.all(np.isfinite(feats.data))

    def test_matches_direct_formula(self):
        fb = make_filterbank("mel", 20, CFG, SR)
        mag = RNG.uniform(0, 2, (20, CFG.n_bins))
        got = filterbank_cepstra(mag, fb, 20).data
        energies = mag ** 2 @ fb.matrix.T
        want = manual_dct2_ortho(np.log(np.maximum(energies, 1e-10)))[:, :20]
        assert np.max(np.abs(got - want)) < 1e-9

    def test_dim_mismatch(self):
        fb = make_filterbank("mel", 20, CFG, SR)
        with pytest.raises(FeatureError):
            filterbank_cepstra(np.zeros((2, 100)), fb, 20)


class TestScmc:
    def test_flat_spectrum_only_c0(self):
        fb = make_filterbank("mel", 20, CFG, SR)
        feats = scmc(np.full((3, CFG.n_bins), 0.7), fb, 20)
        assert np.max(np.abs(feats.data[:, 1:])) < 1e-9

    def test_zero_frame_finite(self):
        fb = make_filterbank("mel", 20, CFG, SR)
        assert np.all(np.isfinite(scmc(np.zeros((1, CFG.n_bins)), fb, 20).data))

    def test_matches_direct_formula(self):
        fb = make_filterbank("linear", 20, CFG, SR)
        mag = RNG.uniform(0, 2, (20, CFG.n_bins))
        got = scmc(mag, fb, 20).data
        want = np.zeros((20, fb.n_filters))
        for t in range(20):
            for m in range(fb.n_filters):
                num = np.sum(fb.matrix[m] * fb.bin_freqs * mag[t])
                den = np.sum(fb.matrix[m] * fb.bin_freqs)
                want[t, m] = num / den
        want = manual_dct2_ortho(np.log(np.maximum(want, 1e-10)))[:, :20]
        assert np.max(np.abs(got - want)) < 1e-9


class TestCqt:
    CQT = CqtConfig(bins_per_octave=12, f_min=100.0, f_max=800.0, hop=256)

    def test_zero_signal(self):
        buf = AudioBuffer(np.zeros(8000), SR)
        assert np.all(cqt_magnitude(buf, self.CQT) == 0.0)

    def test_bin_frequencies_double_per_octave(self):
        freqs = self.CQT.bin_frequencies()
        assert np.allclose(freqs[12] / freqs[0], 2.0)
        assert np.allclose(freqs[24] / freqs[12], 2.0)

    def test_sinusoid_argmax(self):
        freqs = self.CQT.bin_frequencies()
        for j in (3, 11, 20):
            t = np.arange(12000) / SR
            buf = AudioBuffer(0.4 * np.sin(2 * np.pi * freqs[j] * t), SR)
            mag = cqt_magnitude(buf, self.CQT)
            assert np.all(mag.argmax(axis=1) == j)

    def test_matches_direct_correlation(self):
        buf = AudioBuffer(RNG.normal(0, 0.2, 9000), SR)
        mag = cqt_magnitude(buf, self.CQT)
        freqs = self.CQT.bin_frequencies()
        q = self.CQT.q_factor
        n_max = int(np.round(q * SR / freqs[0]))
        for t in (0, mag.shape[0] - 1):
            for j in (0, 7, freqs.size - 1):
                n_j = max(int(np.round(q * SR / freqs[j])), 2)
                seg = buf.samples[t * self.CQT.hop: t * self.CQT.hop + n_j]
                win = np.hamming(n_j)
                kern = win * np.exp(-2j * np.pi * freqs[j] * np.arange(n_j) / SR)
                ref = abs(np.sum(seg * kern.conj())) / win.sum()
                assert mag[t, j] == pytest.approx(ref, abs=1e-9)

    def test_kernel_longer_than_signal_errors(self):
        with pytest.raises(FeatureError, match="kernel"):
            cqt_magnitude(AudioBuffer(np.zeros(100), SR), self.CQT)


class TestCqcc:
    def test_constant_log_power_only_c0(self):
        feats = cqcc(np.full((3, 48), 2.0), n_ceps=12, n_uniform_bins=64,
                     bins_per_octave=12)
        assert np.max(np.abs(feats.data[:, 1:])) < 1e-9

    def test_uniform_axis_resampling_is_identity(self):
        values = RNG.normal(0, 1, (4, 33))
        out = resample_to_uniform(values, np.linspace(2.0, 10.0, 33), 33)
        assert np.allclose(out, values, atol=1e-12)

    def test_matches_two_step_oracle(self):
        mag = RNG.uniform(0.01, 2.0, (20, 48))
        got = cqcc(mag, n_ceps=20, n_uniform_bins=96, bins_per_octave=12).data
        axis = 2.0 ** (np.arange(48) / 12)
        targets = np.linspace(axis[0], axis[-1], 96)
        lp = np.log(np.maximum(mag ** 2, 1e-10))
        interp = np.stack([np.interp(targets, axis, row) for row in lp])
        want = manual_dct2_ortho(interp)[:, :20]
        assert np.max(np.abs(got - want)) < 1e-9

    def test_too_few_uniform_bins(self):
        with pytest.raises(FeatureError):
            cqcc(np.ones((1, 8)), n_ceps=20, n_uniform_bins=10)


class TestLtas:
    def test_single_frame(self):
        mag = RNG.uniform(0.1, 1.0, (1, 16))
        assert np.allclose(ltas(mag), np.log(mag[0] ** 2))

    def test_mean_idempotence(self):
        frame = RNG.uniform(0.1, 1.0, 16)
        two = np.vstack([frame, frame])
        assert np.allclose(ltas(two), ltas(frame[None, :]))

    def test_matches_direct_oracle(self):
        mag = RNG.uniform(0, 1.5, (9, 40))
        want = np.log(np.maximum(np.mean(mag ** 2, axis=0), 1e-10))
        assert np.max(np.abs(ltas(mag) - want)) < 1e-12

    def test_empty_errors(self):
        with pytest.raises(FeatureError):
            ltas(np.zeros((0, 8)))


class TestDeltas:
    def test_constant_features_zero_deltas(self):
        fm = FeatureMatrix(np.full((12, 4), 3.3), "lfcc")
        out = add_deltas(fm, 2)
        assert np.allclose(out.data[:, 4:], 0.0)

    def test_linear_ramp(self):
        fm = FeatureMatrix(np.arange(16.0)[:, None], "lfcc")
        out = add_deltas(fm, 2)
        # delta needs W frames of margin, accel 2W
        assert np.allclose(out.data[2:14, 1], 1.0)
        assert np.allclose(out.data[4:12, 2], 0.0)

    def test_matches_direct_formula(self):
        x = RNG.normal(0, 1, (15, 3))
        w = 2
        got = add_deltas(FeatureMatrix(x, "lfcc"), w).data

        def direct_delta(mat):
            n = mat.shape[0]
            out = np.zeros_like(mat)
            denom = 2 * sum(k * k for k in range(1, w + 1))
            for t in range(n):
                acc = np.zeros(mat.shape[1])
                for k in range(1, w + 1):
                    acc += k * (mat[min(t + k, n - 1)] - mat[max(t - k, 0)])
                out[t] = acc / denom
            return out

        d1 = direct_delta(x)
        d2 = direct_delta(d1)
        assert np.max(np.abs(got - np.hstack([x, d1, d2]))) < 1e-12

    def test_delta_commutes_with_affine(self):
        """delta(a*c + b) = a*delta(c): the shift drops out."""
        x = RNG.normal(0, 1, (20, 3))
        a, b = 2.5, -7.0
        plain = add_deltas(FeatureMatrix(x, "lfcc"), 2).data
        scaled = add_deltas(FeatureMatrix(a * x + b, "lfcc"), 2).data
        assert np.allclose(scaled[:, 3:], a * plain[:, 3:], atol=1e-10)

    def test_output_shape_and_tag(self):
        out = add_deltas(FeatureMatrix(np.zeros((5, 20)), "mfcc"), 2)
        assert out.dims == 60 and out.n_static == 20
        assert out.tag == "mfcc+sda"


class TestCmvn:
    def test_utterance_mode_moments(self):
        fm = FeatureMatrix(RNG.normal(3, 5, (60, 6)), "lfcc")
        out = cmvn(fm)
        assert np.max(np.abs(out.data.mean(axis=0))) < 1e-9
        assert np.max(np.abs(out.data.std(axis=0) - 1.0)) < 1e-9

    def test_constant_dimension_goes_to_zero(self):
        data = np.hstack([np.full((30, 1), 2.0), RNG.normal(0, 1, (30, 1))])
        out = cmvn(FeatureMatrix(data, "lfcc"))
        assert np.allclose(out.data[:, 0], 0.0)

    def test_corpus_mode_identity(self):
        fm = FeatureMatrix(RNG.normal(0, 1, (10, 4)), "lfcc")
        out = cmvn(fm, CmvnStats(mean=np.zeros(4), std=np.ones(4)))
        assert np.array_equal(out.data, fm.data)

    def test_stats_dim_mismatch(self):
        fm = FeatureMatrix(np.zeros((4, 3)), "lfcc")
        with pytest.raises(FeatureError):
            cmvn(fm, CmvnStats(mean=np.zeros(5), std=np.ones(5)))

    def test_corpus_stats_pool(self):
        mats = [FeatureMatrix(RNG.normal(1, 2, (7, 3)), "lfcc") for _ in range(4)]
        stats = corpus_cmvn_stats(mats)
        pooled = np.vstack([m.data for m in mats])
        assert np.allclose(stats.mean, pooled.mean(axis=0))
        assert np.allclose(stats.std, pooled.std(axis=0))


@settings(max_examples=40, deadline=None)
@given(st.integers(500, 3000), st.integers(0, 2**32 - 1))
def test_finite_in_finite_out(n, seed):
    """Every extractor keeps finite inputs finite (log floors engaged)."""
    r = np.random.default_rng(seed)
    buf = AudioBuffer(np.clip(r.normal(0, 0.2, n), -1, 1), SR)
    for kind in ("mfcc", "lfcc", "scmc"):
        feats = compute_features(buf, FeatureRecipe(kind=kind))
        assert np.all(np.isfinite(feats.data))


def test_frame_count_is_pure_function_of_geometry():
    for n in (400, 401, 959, 960, 1600):
        buf = AudioBuffer(np.zeros(n), SR)
        mag = stft_magnitude(buf, CFG)
        assert mag.shape[0] == (n - CFG.window_length) // CFG.hop + 1


class TestFeatureFiles:
    def test_roundtrip(self, tmp_path):
        fm = add_deltas(FeatureMatrix(RNG.normal(0, 1, (9, 20)), "imfcc"), 2)
        p = tmp_path / "u.feat"
        write_feature_file(p, fm)
        back = read_feature_file(p)
        assert back.tag == "imfcc+sda"
        assert back.data.shape == fm.data.shape
        assert np.allclose(back.data, fm.data, atol=1e-6)  # float32 payload

    def test_manifest_roundtrip(self, tmp_path):
        entries = {"u2": "feats/u2.feat", "u1": "feats/u1.feat"}
        p = tmp_path / "features.manifest"
        write_feature_manifest(p, entries)
        back = read_feature_manifest(p)
        assert set(back) == {"u1", "u2"}
        assert back["u1"] == tmp_path / "feats/u1.feat"

    def test_corrupt_file(self, tmp_path):
        p = tmp_path / "bad.feat"
        p.write_bytes(b"not a feature file at all")
        with pytest.raises(FeatureError):
            read_feature_file(p)
