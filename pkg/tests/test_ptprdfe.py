import numpy as np
import pytest

from _synth import received
from ftnlink.exceptions import ParameterError, TrainingFailedError
from ftnlink.ptprdfe import PTPRDFE, EqualizerState, PrTarget, equalize, pr_expand, train
from ftnlink.shaping import solve_mb
from ftnlink.txchain import pcs_constellation, qam_constellation

Q16 = qam_constellation(16)


def reference_dd_lms(x, center0, n_sym, sps, ff, fb, points, known, mu_ff, mu_fb):
    """Textbook decision-directed LMS DFE (delta target, no phase loop)."""
    ff = ff.copy()
    fb = fb.copy()
    half = ff.size // 2
    hist = np.zeros(max(fb.size, 1), complex)
    ys, ds = [], []
    for k in range(n_sym):
        c = center0 + sps * k
        idx = np.arange(c - half, c + half + 1)
        buf = np.where((idx >= 0) & (idx < x.size), x[np.clip(idx, 0, x.size - 1)], 0)
        y = ff @ buf - fb @ hist[:fb.size]
        s = known[k] if k < known.size else points[np.argmin(np.abs(y - points))]
        e = s - y
        ff = ff + mu_ff * e * np.conj(buf)
        fb = fb - mu_fb * e * np.conj(hist[:fb.size])
        hist = np.roll(hist, 1)
        hist[0] = s
        ys.append(y)
        ds.append(s)
    return np.array(ys), np.array(ds), ff, fb


class TestPrTarget:
    def test_monic(self):
        with pytest.raises(ParameterError):
            PrTarget(np.array([0.5, 1.0]))
        with pytest.raises(ParameterError):
            PrTarget(np.array([]))

    def test_reference(self):
        t = PrTarget(np.array([1.0, 1.0]))
        np.testing.assert_allclose(t.reference([1, 2, 3]), [1, 3, 5])


class TestPrExpand:
    def test_identity_target(self):
        assert pr_expand(Q16, PrTarget(np.array([1.0]))) is Q16

    def test_16qam_gives_49_points(self):
        c = pr_expand(Q16, PrTarget())
        assert c.size == 49
        np.testing.assert_allclose(c.levels / Q16.scale, [-6, -4, -2, 0, 2, 4, 6], atol=1e-9)
        np.testing.assert_allclose(c.level_probabilities, np.array([1, 2, 3, 4, 3, 2, 1]) / 16)
        assert c.probabilities.sum() == pytest.approx(1.0)

    def test_qpsk_gives_9_points(self):
        c = pr_expand(qam_constellation(4), PrTarget())
        assert c.size == 9
        np.testing.assert_allclose(c.level_probabilities, [0.25, 0.5, 0.25])

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_point_count_and_self_convolution(self, order):
        q = qam_constellation(order)
        c = pr_expand(q, PrTarget())
        assert c.size == (2 * int(np.sqrt(order)) - 1) ** 2
        np.testing.assert_allclose(c.level_probabilities,
                                   np.convolve(q.level_probabilities, q.level_probabilities))

    def test_shaped_input(self):
        q = pcs_constellation(solve_mb())
        c = pr_expand(q, PrTarget())
        np.testing.assert_allclose(c.level_probabilities,
                                   np.convolve(q.level_probabilities, q.level_probabilities))


class TestState:
    def test_invariants(self):
        with pytest.raises(ParameterError):
            EqualizerState(np.zeros(4), np.zeros(2))
        with pytest.raises(ParameterError):
            EqualizerState.initial(mu_ff=-1.0)
        s = EqualizerState.initial(7, 2)
        assert s.ff_taps[3] == 1 and np.count_nonzero(s.ff_taps) == 1


class TestTrain:
    def test_nyquist_converges_to_delta(self):
        rx, c0, pre, _, _ = received(alpha=1.0)
        eq = PTPRDFE(pr_taps=(1.0,), mu_train=5e-3, train_passes=20).fit(rx, pre, center0=c0)
        assert eq.state_.training_mse[-1] < 1e-3
        ff = np.abs(eq.state_.ff_taps)
        assert np.argmax(ff) == ff.size // 2
        assert np.sum(ff ** 2) - ff.max() ** 2 < 0.01 * ff.max() ** 2

    def test_zero_step_leaves_state(self):
        rx, c0, pre, _, _ = received(alpha=1.0)
        st = EqualizerState.initial(31, 4, mu_ff=0.0)
        out = train(st, rx, pre, PrTarget(np.array([1.0])), c0)
        np.testing.assert_array_equal(out.ff_taps, st.ff_taps)
        np.testing.assert_array_equal(out.fb_taps, st.fb_taps)
        assert out.phase == st.phase and out is not st

    def test_converged_by_rule(self):
        rx, c0, pre, _, _ = received(alpha=0.8, snr_db=14)
        eq = PTPRDFE(mu_train=5e-3, train_passes=20).fit(rx, pre, center0=c0)
        mse = eq.state_.training_mse
        assert mse.size == 20
        assert mse[-1] < 2 * mse.min()

    def test_pr_target_beats_delta_on_ftn(self):
        for seed in range(3):
            rx, c0, pre, _, _ = received(alpha=0.8, snr_db=14, seed=seed)
            mse = {}
            for taps in [(1.0,), (1.0, 1.0)]:
                eq = PTPRDFE(pr_taps=taps, mu_train=5e-3, train_passes=20).fit(rx, pre, center0=c0)
                mse[taps] = eq.state_.training_mse[-1]
            assert mse[(1.0, 1.0)] < mse[(1.0,)]

    def test_divergence_detected(self):
        rx, c0, pre, _, _ = received(alpha=0.8, snr_db=14)
        with pytest.raises(TrainingFailedError):
            PTPRDFE(mu_train=5.0, train_passes=3).fit(rx, pre, center0=c0)


class TestEqualize:
    def test_clean_channel(self):
        rx, c0, pre, sy, _ = received(alpha=1.0, n_payload=3000)
        eq = PTPRDFE(pr_taps=(1.0,), mu_train=0.0).fit(rx, pre, center0=c0)
        eq.transform(rx, Q16, n_symbols=sy.size)
        np.testing.assert_allclose(eq.decisions_, sy)
        assert np.max(np.abs(eq.phase_trace_)) < 1e-3

    def test_static_phase(self):
        rx, c0, pre, sy, _ = received(alpha=1.0, phase0=0.3, n_payload=3000)
        eq = PTPRDFE(pr_taps=(1.0,), mu_train=0.0, mu_track=0.0).fit(rx, pre, center0=c0)
        eq.transform(rx, Q16, n_symbols=sy.size)
        assert eq.phase_trace_[2000] == pytest.approx(0.3, abs=0.02)
        np.testing.assert_allclose(eq.decisions_, sy)

    @pytest.mark.parametrize("alpha,taps", [(1.0, (1.0,)), (0.8, (1.0, 1.0))])
    def test_wiener_tracking(self, alpha, taps):
        rx, c0, pre, sy, theta = received(alpha=alpha, snr_db=14, linewidth_hz=200e3,
                                          n_payload=20000)
        eq = PTPRDFE(pr_taps=taps, mu_train=5e-3, train_passes=20, mu_phase=5e-2, mu_track=0.0)
        eq.fit(rx, pre, center0=c0)
        eq.transform(rx, Q16, n_symbols=sy.size)
        d = np.angle(np.exp(1j * (eq.phase_trace_ - theta)))[2000:]
        # training leaves a constant rotation in the taps; the loop tracks around it
        tap_phase = np.angle(np.sum(eq.final_state_.ff_taps))
        assert np.mean(d) == pytest.approx(tap_phase, abs=0.05)
        assert np.sqrt(np.mean((d - np.mean(d)) ** 2)) < 0.1

    def test_rotation_invariance(self):
        rx, c0, pre, sy, _ = received(alpha=1.0, snr_db=20, n_payload=4000)
        runs = []
        for phi in (0.0, 0.25):
            eq = PTPRDFE(pr_taps=(1.0,), mu_train=0.0, mu_track=0.0)
            eq.fit(rx, pre, center0=c0)
            eq.transform(rx * np.exp(1j * phi), Q16, n_symbols=sy.size)
            runs.append((eq.phase_trace_.copy(), eq.decisions_.copy()))
        shift = runs[1][0][1000:] - runs[0][0][1000:]
        assert np.mean(shift) == pytest.approx(0.25, abs=0.02)
        np.testing.assert_array_equal(runs[0][1], runs[1][1])

    def test_output_noise_is_coloured(self):
        rx, c0, pre, sy, _ = received(alpha=0.8, snr_db=14, n_payload=20000)
        eq = PTPRDFE(mu_train=5e-3, train_passes=20).fit(rx, pre, center0=c0)
        y = eq.transform(rx, Q16, n_symbols=sy.size)
        n = (y - PrTarget().reference(sy))[pre.size:]
        rho = np.real(np.vdot(n[:-1], n[1:])) / np.real(np.vdot(n, n))
        assert abs(rho) > 0.03

    def test_matches_reference_dfe(self):
        rx, c0, pre, sy, _ = received(alpha=1.0, snr_db=16, n_payload=1500, seed=7)
        rng = np.random.default_rng(0)
        ff0 = np.zeros(11, complex)
        ff0[5] = 1.0
        ff0 += 0.01 * (rng.standard_normal(11) + 1j * rng.standard_normal(11))
        fb0 = 0.01 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        n_sym = 1200
        known = pre[:300]
        y_ref, d_ref, ff_ref, fb_ref = reference_dd_lms(rx, c0, n_sym, 2, ff0, fb0, Q16.points,
                                                        known, 2e-3, 1e-3)
        st = EqualizerState(ff0.copy(), fb0.copy(), mu_ff=2e-3, mu_fb=1e-3, mu_phase=0.0)
        y, d, ph = equalize(st, rx, PrTarget(np.array([1.0])), Q16, c0, n_sym, known)
        np.testing.assert_allclose(y, y_ref, atol=1e-10)
        np.testing.assert_array_equal(d, d_ref)
        np.testing.assert_allclose(st.ff_taps, ff_ref, atol=1e-10)
        np.testing.assert_allclose(st.fb_taps, fb_ref, atol=1e-10)
        assert np.all(ph == 0)

    def test_estimator_requires_fit(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            PTPRDFE().transform(np.ones(100, complex), Q16)
        assert PTPRDFE(n_ff=15).get_params()["n_ff"] == 15
