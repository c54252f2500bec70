"""Signal containers and DSP primitives: RRC design, FIR filtering,
rate conversion and spectral occupancy."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as sps_signal

from ._validation import check_1d, check_scalar
from .exceptions import ParameterError

WELCH_SEGMENT = 4096
POLY_HALF_LEN = 32  # anti-aliasing filter half-length per unit of max(p, q)


@dataclass(frozen=True, eq=False)
class ComplexFrame:
    """Uniformly sampled complex baseband waveform."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128)
        if s.ndim != 1:
            raise ParameterError("frame samples must be 1-D")
        if not self.sample_rate > 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def with_samples(self, samples) -> "ComplexFrame":
        return ComplexFrame(samples, self.sample_rate)


@dataclass(frozen=True, eq=False)
class FirFilter:
    """FIR taps plus the index treated as time zero."""

    taps: np.ndarray
    reference_delay: int = 0

    def __post_init__(self):
        t = np.array(self.taps)
        if t.ndim != 1 or t.size == 0:
            raise ParameterError("filter taps must be a non-empty 1-D sequence")
        if not np.iscomplexobj(t):
            t = t.astype(np.float64)
        d = int(self.reference_delay)
        if not 0 <= d < t.size:
            raise ParameterError(f"reference_delay {d} outside [0, {t.size})")
        t.flags.writeable = False
        object.__setattr__(self, "taps", t)
        object.__setattr__(self, "reference_delay", d)

    def __len__(self):
        return self.taps.size


def rrc_pulse(t, rolloff: float) -> np.ndarray:
    """Closed-form root-raised-cosine impulse response at times ``t``
    (in units of the symbol period), unnormalized."""
    t = np.asarray(t, dtype=np.float64)
    b = float(rolloff)
    h = np.empty_like(t)
    at_zero = np.isclose(t, 0.0, atol=1e-12)
    if b > 0:
        at_sing = np.isclose(np.abs(t), 1.0 / (4.0 * b), atol=1e-12)
    else:
        at_sing = np.zeros_like(at_zero)
    regular = ~(at_zero | at_sing)
    tr = t[regular]
    num = np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))
    den = np.pi * tr * (1 - (4 * b * tr) ** 2)
    h[regular] = num / den
    h[at_zero] = 1.0 - b + 4.0 * b / np.pi
    if b > 0:
        q = np.pi / (4.0 * b)
        h[at_sing] = b / np.sqrt(2.0) * ((1 + 2 / np.pi) * np.sin(q) + (1 - 2 / np.pi) * np.cos(q))
    return h


def design_rrc(rolloff: float = 0.1, span: int = 32, sps: int = 4,
               bandwidth_scale: float = 1.0) -> FirFilter:
    """Unit-energy RRC filter spanning ``span`` symbols at ``sps`` samples/symbol.

    ``bandwidth_scale`` < 1 compresses the spectrum (and stretches the pulse
    in time) while the symbol clock stays fixed, which is how FTN signaling
    is realized here.
    """
    check_scalar(rolloff, "rolloff", lo=0.0, hi=1.0)
    check_scalar(bandwidth_scale, "bandwidth_scale", lo=0.0, hi=1.0, lo_inclusive=False)
    check_scalar(span, "span", lo=2, integer=True)
    check_scalar(sps, "sps", lo=2, integer=True)
    n = span * sps + 1
    if n % 2 == 0:
        raise ParameterError("span*sps must be even so the filter has a center tap")
    center = n // 2
    t = (np.arange(n) - center) / sps
    h = rrc_pulse(bandwidth_scale * t, rolloff)
    h /= np.sqrt(np.sum(h ** 2))
    return FirFilter(h, center)


def fir_filter(frame: ComplexFrame, filt: FirFilter) -> ComplexFrame:
    """Linear convolution aligned so input index k lands at output index k."""
    x = frame.samples
    y = sps_signal.oaconvolve(x, filt.taps) if x.size > 4 * filt.taps.size else np.convolve(x, filt.taps)
    d = filt.reference_delay
    return ComplexFrame(y[d:d + x.size], frame.sample_rate)


def rational_ratio(source_rate: float, target_rate: float, max_term: int = 64) -> tuple[int, int] | None:
    """Return (up, down) if target/source is a ratio of small integers."""
    ratio = Fraction(target_rate / source_rate).limit_denominator(max_term)
    if ratio.numerator > max_term or ratio.denominator > max_term:
        return None
    if not np.isclose(float(ratio) * source_rate, target_rate, rtol=1e-12, atol=0):
        return None
    return ratio.numerator, ratio.denominator


def resample(frame: ComplexFrame, target_rate: float, method: str = "fft") -> ComplexFrame:
    """Band-limited sample-rate conversion.

    ``method="fft"`` treats the frame as one period of a band-limited signal
    (exact for circular frames). ``method="poly"`` uses a polyphase filter and
    accepts only rational ratios with terms up to 64.
    """
    check_scalar(target_rate, "target_rate", lo=0.0, lo_inclusive=False)
    if target_rate == frame.sample_rate:
        return frame
    x = frame.samples
    if method == "poly":
        pq = rational_ratio(frame.sample_rate, target_rate)
        if pq is None:
            raise ParameterError(
                f"ratio {target_rate}/{frame.sample_rate} is not a small rational p/q")
        up, down = pq
        m = max(up, down)
        h = sps_signal.firwin(2 * POLY_HALF_LEN * m + 1, 1.0 / m, window=("kaiser", 14.0))
        y = sps_signal.resample_poly(x, up, down, window=h)
        return ComplexFrame(y, frame.sample_rate * up / down)
    if method != "fft":
        raise ParameterError(f"unknown resampling method {method!r}")
    n_out = int(round(x.size * target_rate / frame.sample_rate))
    if n_out < 1:
        raise ParameterError("frame too short for the requested rate")
    y = _fft_resample(x, n_out)
    return ComplexFrame(y, frame.sample_rate * n_out / x.size)


def _fft_resample(x: np.ndarray, n_out: int) -> np.ndarray:
    n_in = x.size
    X = np.fft.fft(x)
    Y = np.zeros(n_out, dtype=np.complex128)
    n = min(n_in, n_out)
    pos = (n + 1) // 2
    neg = n - pos
    Y[:pos] = X[:pos]
    if neg:
        Y[-neg:] = X[-neg:]
    if n % 2 == 0 and n_in != n_out:
        # split/merge the shared Nyquist bin so real content stays real
        if n_out > n_in:
            Y[-neg] *= 0.5
            Y[n // 2] = Y[-neg]
        else:
            Y[-neg] += X[n // 2]
    return np.fft.ifft(Y) * (n_out / n_in)


def welch_psd(frame: ComplexFrame, nperseg: int = WELCH_SEGMENT) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided Hann-window Welch PSD with 50% overlap, frequencies ascending."""
    nseg = min(nperseg, len(frame))
    f, p = sps_signal.welch(frame.samples, fs=frame.sample_rate, window="hann", nperseg=nseg,
                            noverlap=nseg // 2, return_onesided=False, detrend=False,
                            scaling="density")
    return np.fft.fftshift(f), np.fft.fftshift(p)


def occupied_bandwidth(frame: ComplexFrame, power_fraction: float = 0.99) -> float:
    """Smallest width, symmetric about the spectral centroid, holding
    ``power_fraction`` of the total power."""
    check_scalar(power_fraction, "power_fraction", lo=0.0, hi=1.0, lo_inclusive=False,
                 hi_inclusive=False)
    if len(frame) < 1024:
        raise ParameterError("occupied_bandwidth needs at least 1024 samples")
    f, p = welch_psd(frame)
    total = p.sum()
    if total <= 0:
        return 0.0
    centroid = float(np.sum(f * p) / total)
    dist = np.abs(f - centroid)
    order = np.argsort(dist, kind="stable")
    cum = np.cumsum(p[order]) / total
    k = int(np.searchsorted(cum, power_fraction))
    k = min(k, cum.size - 1)
    if k == 0:
        return 2.0 * float(dist[order[0]])
    # interpolate the crossing between consecutive sorted distances
    d0, d1 = dist[order[k - 1]], dist[order[k]]
    c0, c1 = cum[k - 1], cum[k]
    frac = (power_fraction - c0) / (c1 - c0) if c1 > c0 else 1.0
    return 2.0 * float(d0 + frac * (d1 - d0))


def signal_power(x) -> float:
    x = check_1d(x, name="x")
    return float(np.mean(np.abs(x) ** 2))
