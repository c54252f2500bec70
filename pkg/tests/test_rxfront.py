import numpy as np
import pytest

from _synth import BAUD, received
from ftnlink.channel import NOISE_FREE, ChannelConfig, apply_awgn, apply_cd
from ftnlink.exceptions import EstimationFailedError, SyncFailedError
from ftnlink.harness import build_tx, ftn_config, pcs_config, receive_front, transmit
from ftnlink.rxfront import compensate_cd, compensate_cfo, estimate_fo_pilot, synchronize
from ftnlink.sigkit import ComplexFrame
from ftnlink.txchain import FrameLayout

N_FFT = 1 << 20


def foe_errors(cfo_hz, snr_db, seeds, linewidth_hz=200e3):
    cfg = ftn_config(channel=ChannelConfig(snr_db_at_zero_margin=snr_db, cfo_hz=cfo_hz,
                                           linewidth_hz=linewidth_hz))
    errs = []
    for s in seeds:
        tx = build_tx(cfg, s)
        rx = transmit(cfg, tx, 0.0, s)
        errs.append(estimate_fo_pilot(rx, tx.layout, cfg.foe_window_hz, n_fft=N_FFT) - cfo_hz)
    return np.array(errs), rx.sample_rate


class TestFoe:
    def test_zero_offset_within_one_bin(self):
        # laser phase noise wanders the tone by ~100 kHz, so this is checked without it
        errs, fs = foe_errors(0.0, 30.0, range(3), linewidth_hz=0.0)
        assert np.all(np.abs(errs) <= fs / N_FFT)

    @pytest.mark.slow
    def test_500mhz_at_5db(self):
        errs, fs = foe_errors(500e6, 5.0, range(100))
        assert fs == 80e9
        assert np.max(np.abs(errs)) <= 1e6

    @pytest.mark.slow
    def test_unbiased(self):
        # the mean of N unbiased errors scatters by rms/sqrt(N); 400 seeds put
        # that at 5% of the single-trial RMS, leaving room to see a real bias
        errs, _ = foe_errors(500e6, 5.0, range(400))
        rms = np.sqrt(np.mean(errs ** 2))
        assert abs(np.mean(errs)) <= 0.1 * rms

    def test_negative_offset(self):
        errs, _ = foe_errors(-1.2e9, 10.0, range(2))
        assert np.all(np.abs(errs) <= 1e6)

    def test_pilot_absent(self):
        cfg = ftn_config(pilot_tone_power_ratio=-np.inf)
        tx = build_tx(cfg, 0)
        rx = transmit(cfg, tx, 0.0, 0)
        layout = FrameLayout(pilot_tone_freq=cfg.pilot_freq)
        with pytest.raises(EstimationFailedError):
            estimate_fo_pilot(rx, layout, cfg.foe_window_hz)
        # the same frame with the tone is found comfortably
        cfg = ftn_config()
        tx = build_tx(cfg, 0)
        rx = transmit(cfg, tx, 0.0, 0)
        assert abs(estimate_fo_pilot(rx, tx.layout, cfg.foe_window_hz) - cfg.channel.cfo_hz) < 5e6

    def test_window_too_narrow(self):
        x = ComplexFrame(np.ones(1024, complex), 1.0)
        with pytest.raises(EstimationFailedError):
            estimate_fo_pilot(x, FrameLayout(pilot_tone_freq=0.3), 1e-6)

    def test_compensate_cfo_inverts(self):
        rng = np.random.default_rng(0)
        x = ComplexFrame(rng.standard_normal(512) + 1j * rng.standard_normal(512), 10.0)
        k = np.arange(512)
        y = x.with_samples(x.samples * np.exp(2j * np.pi * 1.3 * k / 10.0))
        np.testing.assert_allclose(compensate_cfo(y, 1.3).samples, x.samples, atol=1e-12)


class TestCdc:
    def test_roundtrip(self):
        rng = np.random.default_rng(1)
        x = ComplexFrame(rng.standard_normal(1 << 15) + 1j * rng.standard_normal(1 << 15), 80e9)
        cfg = ChannelConfig(fiber_len_km=100)
        y = compensate_cd(apply_cd(x, cfg), cfg)
        assert np.sqrt(np.mean(np.abs(y.samples - x.samples) ** 2)) < 1e-8

    def test_identity_and_energy(self):
        rng = np.random.default_rng(2)
        x = ComplexFrame(rng.standard_normal(4096) + 0j, 80e9)
        assert compensate_cd(x, ChannelConfig(fiber_len_km=0)) is x
        y = compensate_cd(x, ChannelConfig(fiber_len_km=30))
        assert y.power == pytest.approx(x.power, rel=1e-9)


class TestSync:
    def test_known_delay_exact(self):
        rx, c0, pre, _, _ = received(n_payload=2000, seed=3)
        frame = ComplexFrame(np.roll(rx, 1234), 2 * BAUD)
        off, phase = synchronize(frame, pre, 2)
        assert off * 2 + phase == c0 + 1234

    def test_odd_sample_lag_gives_phase(self):
        rx, c0, pre, _, _ = received(n_payload=2000, seed=4)
        off, phase = synchronize(ComplexFrame(np.roll(rx, 1235), 2 * BAUD), pre, 2)
        assert (off, phase) == divmod(c0 + 1235, 2)

    @pytest.mark.slow
    def test_10db_hit_rate(self):
        hits = 0
        for s in range(100):
            rx, c0, pre, _, _ = received(n_payload=3000, snr_db=10.0, seed=s, preamble_len=256)
            d = int(np.random.default_rng(1000 + s).integers(0, 2000))
            off, phase = synchronize(ComplexFrame(np.roll(rx, d), 2 * BAUD), pre, 2)
            hits += (off * 2 + phase) // 2 == (c0 + d) // 2
        assert hits >= 99

    def test_absent_preamble(self):
        rx, _, pre, _, _ = received(n_payload=4000, seed=5)
        other = np.random.default_rng(99)
        wrong = (1 - 2 * other.integers(0, 2, pre.size)) + 1j * (1 - 2 * other.integers(0, 2, pre.size))
        with pytest.raises(SyncFailedError):
            synchronize(ComplexFrame(rx, 2 * BAUD), wrong / np.sqrt(2), 2)

    def test_frame_too_short(self):
        with pytest.raises(SyncFailedError):
            synchronize(ComplexFrame(np.ones(100, complex), 1.0), np.ones(64), 2)

    def test_noise_only(self):
        noise = ComplexFrame(np.zeros(20000, complex), 1.0)
        noise = apply_awgn(noise, ChannelConfig(snr_db_at_zero_margin=0, seed=8), signal_power=1.0)
        pre = np.exp(1j * np.pi / 2 * np.random.default_rng(8).integers(0, 4, 256))
        with pytest.raises(SyncFailedError):
            synchronize(noise, pre, 2)


def test_front_chain_identity_up_to_delay():
    cfg = pcs_config(max_delay_samples=0.0,
                     channel=ChannelConfig(linewidth_hz=0.0, fiber_len_km=40.0, cfo_hz=3e8))
    tx = build_tx(cfg, 0)
    rx = transmit(cfg, tx, NOISE_FREE, 0)
    front = receive_front(cfg, tx, rx, NOISE_FREE, 0)
    n = tx.symbols.size
    y = front.samples[front.center0::cfg.rx_sps][:n]
    # residual CFO after FOE is a slow rotation; remove it with the preamble
    g = np.vdot(tx.symbols[:cfg.preamble_len], y[:cfg.preamble_len]) / cfg.preamble_len
    err = y / g - tx.symbols
    k = np.arange(n)
    drift = np.polyfit(k, np.unwrap(np.angle(y / g / tx.symbols)), 1)[0]
    assert abs(drift) * cfg.baud / (2 * np.pi) < 1e6
    y = y * np.exp(-1j * drift * (k - cfg.preamble_len / 2))
    err = y / g - tx.symbols
    assert np.sqrt(np.mean(np.abs(err) ** 2)) < 1e-2
