"""Receiver front-end: pilot-tone frequency offset estimation, CD
compensation and preamble-anchored synchronization."""

from __future__ import annotations

import numpy as np

from ._validation import check_1d, check_scalar
from .channel import ChannelConfig, cd_transfer
from .exceptions import EstimationFailedError, SyncFailedError
from .sigkit import ComplexFrame
from .txchain import FrameLayout


def estimate_fo_pilot(frame: ComplexFrame, layout: FrameLayout, search_window_hz: float,
                      n_fft: int | None = None, min_peak_db: float = 6.0) -> float:
    """Frequency offset from the pilot tone's periodogram peak.

    The Hann-windowed periodogram is searched within
    ``pilot_freq +- search_window_hz``; the peak is refined by parabolic
    interpolation of the log-power over three bins. The peak must clear
    the window median by ``min_peak_db`` on top of the level the largest of
    the window's independent noise bins would reach (``ln n / ln 2`` times
    the median of an exponential periodogram).
    """
    check_scalar(search_window_hz, "search_window_hz", lo=0.0, lo_inclusive=False)
    x = frame.samples
    n = x.size
    if n_fft is None:
        n_fft = 1 << int(np.ceil(np.log2(n)))
    n_fft = max(n_fft, n)
    fs = frame.sample_rate
    spec = np.abs(np.fft.fft(x * np.hanning(n), n_fft)) ** 2
    freqs = np.fft.fftfreq(n_fft, 1.0 / fs)
    f0 = layout.pilot_tone_freq
    win = np.flatnonzero(np.abs(freqs - f0) <= search_window_hz)
    if win.size < 3:
        raise EstimationFailedError("search window narrower than three FFT bins")
    k = win[np.argmax(spec[win])]
    med = np.median(spec[win])
    n_indep = max(2.0, win.size * n / n_fft)
    need = np.log(n_indep) / np.log(2.0) * 10 ** (min_peak_db / 10.0)
    if not spec[k] >= med * need:
        raise EstimationFailedError("no pilot peak above the window floor")
    a, b, c = np.log(spec[[(k - 1) % n_fft, k, (k + 1) % n_fft]] + 1e-300)
    den = a - 2 * b + c
    delta = 0.5 * (a - c) / den if den != 0 else 0.0
    return float(freqs[k] + delta * fs / n_fft - f0)


def compensate_cfo(frame: ComplexFrame, offset_hz: float) -> ComplexFrame:
    k = np.arange(len(frame))
    return frame.with_samples(frame.samples * np.exp(-2j * np.pi * offset_hz * k / frame.sample_rate))


def compensate_cd(frame: ComplexFrame, config: ChannelConfig) -> ComplexFrame:
    """Apply the conjugate of the fiber's dispersion transfer function."""
    if config.fiber_len_km == 0:
        return frame
    H = cd_transfer(len(frame), frame.sample_rate, config, sign=-1.0)
    return frame.with_samples(np.fft.ifft(np.fft.fft(frame.samples) * H))


def preamble_correlation(x: np.ndarray, preamble: np.ndarray, sps: int) -> np.ndarray:
    """|sum_k conj(p_k) x[lag + sps k]| for every circular lag."""
    n = x.size
    ref = np.zeros(n, dtype=np.complex128)
    ref[:preamble.size * sps:sps] = preamble
    return np.abs(np.fft.ifft(np.fft.fft(x) * np.conj(np.fft.fft(ref))))


def synchronize(frame: ComplexFrame, preamble_reference, sps: int, min_ratio: float = 3.0):
    """Locate the preamble; returns ``(symbol_offset, timing_phase)`` such
    that preamble symbol 0 sits at sample ``symbol_offset*sps + timing_phase``.

    The peak must clear ``min_ratio`` times the sidelobe RMS and also the
    level that the largest of ``n`` noise-only lags would reach
    (``sqrt(2 ln n)`` RMS), so long frames without a preamble are rejected.
    """
    pre = check_1d(preamble_reference, dtype=np.complex128, name="preamble_reference")
    x = frame.samples
    if x.size < pre.size * sps:
        raise SyncFailedError("frame shorter than the preamble")
    corr = preamble_correlation(x, pre, sps)
    lag = int(np.argmax(corr))
    peak = corr[lag]
    guard = np.ones(corr.size, dtype=bool)
    guard[np.arange(lag - 2 * sps, lag + 2 * sps + 1) % corr.size] = False
    side = np.sqrt(np.mean(corr[guard] ** 2))
    need = max(min_ratio, np.sqrt(2.0 * np.log(corr.size)))
    if not peak >= need * side:
        raise SyncFailedError(f"correlation peak only {peak / side:.2f}x the sidelobe RMS")
    return lag // sps, lag % sps
