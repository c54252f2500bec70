"""Transmitter: constellations and Gray mapping, FTN/Nyquist pulse shaping,
pilot-tone insertion and frame assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_1d, check_bits, check_rng, check_scalar
from .exceptions import ConfigurationError, ParameterError
from .sigkit import ComplexFrame, design_rrc, occupied_bandwidth

DEFAULT_ROLLOFF = 0.1
DEFAULT_SPAN = 96


@dataclass(frozen=True, eq=False)
class Constellation:
    """Square QAM built from one PAM alphabet per dimension.

    Point index ``i * L + q`` combines ascending I level ``i`` and Q level
    ``q``; ``bit_labels[idx]`` is the I label followed by the Q label.
    Points are scaled to unit mean energy under ``probabilities``.
    """

    points: np.ndarray
    probabilities: np.ndarray
    bit_labels: np.ndarray
    levels: np.ndarray
    level_probabilities: np.ndarray
    level_labels: np.ndarray
    scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        if np.unique(np.round(self.points, 12)).size != self.points.size:
            raise ParameterError("constellation points must be distinct")
        if abs(self.probabilities.sum() - 1.0) > 1e-9 or np.any(self.probabilities < 0):
            raise ParameterError("constellation probabilities must be a distribution")

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_labels.shape[1]

    @property
    def mean_energy(self) -> float:
        return float(np.sum(self.probabilities * np.abs(self.points) ** 2))

    def nearest(self, x) -> np.ndarray:
        """Index of the nearest point (Euclidean, per-dimension slicing)."""
        x = np.asarray(x, dtype=np.complex128)
        i = _slice(x.real, self.levels)
        q = _slice(x.imag, self.levels)
        return i * self.levels.size + q

    def labels_of(self, idx) -> np.ndarray:
        return self.bit_labels[np.asarray(idx)].reshape(-1)


def _slice(v, levels):
    edges = 0.5 * (levels[1:] + levels[:-1])
    return np.searchsorted(edges, v)


def _square_qam(pam_levels, level_probs, level_labels, name) -> Constellation:
    lev = np.asarray(pam_levels, dtype=np.float64)
    lp = np.asarray(level_probs, dtype=np.float64)
    energy = 2.0 * np.sum(lp * lev ** 2)
    scale = 1.0 / math.sqrt(energy)
    lev_n = lev * scale
    L = lev.size
    pts = (lev_n[:, None] + 1j * lev_n[None, :]).reshape(-1)
    probs = (lp[:, None] * lp[None, :]).reshape(-1)
    labels = np.concatenate([np.repeat(level_labels, L, axis=0),
                             np.tile(level_labels, (L, 1))], axis=1).astype(np.int8)
    return Constellation(pts, probs, labels, lev_n, lp, np.asarray(level_labels, np.int8),
                         scale, name)


def pam_gray_labels(n_levels: int) -> np.ndarray:
    nb = int(round(math.log2(n_levels)))
    g = np.arange(n_levels) ^ (np.arange(n_levels) >> 1)
    return ((g[:, None] >> np.arange(nb - 1, -1, -1)) & 1).astype(np.int8)


def qam_constellation(order: int = 16) -> Constellation:
    """Uniform Gray-mapped square M-QAM (PAM4 Gray: 00,01,11,10 ascending)."""
    L = int(round(math.sqrt(order)))
    if L * L != order or L & (L - 1):
        raise ParameterError("order must be a square power of four")
    lev = np.arange(-(L - 1), L, 2, dtype=np.float64)
    return _square_qam(lev, np.full(L, 1.0 / L), pam_gray_labels(L), f"{order}QAM")


def pcs_constellation(spec) -> Constellation:
    """PCS square QAM from a :class:`~ftnlink.shaping.ShapingSpec`.

    Labels are sign bit (1 = positive) followed by the Gray label of the
    amplitude index, matching the PAS framing.
    """
    from .shaping import amplitude_labels

    a = spec.amplitude_alphabet
    n = a.size
    lev = np.concatenate([-a[::-1], a])
    lp = np.concatenate([spec.probabilities[::-1], spec.probabilities]) / 2.0
    amp = amplitude_labels(n)
    labels = np.concatenate([
        np.concatenate([np.zeros((n, 1), np.int8), amp[::-1]], axis=1),
        np.concatenate([np.ones((n, 1), np.int8), amp], axis=1)])
    return _square_qam(lev, lp, labels, f"PCS{4 * n * n}QAM-{spec.kind}")


def qam_map(bits, constellation: Constellation) -> np.ndarray:
    """Map a bit stream onto constellation points via the bit labels."""
    b = check_bits(bits)
    nb = constellation.bits_per_symbol
    if b.size % nb:
        raise ParameterError(f"bit count {b.size} is not a multiple of {nb}")
    return constellation.points[bits_to_indices(b, constellation)]


def bits_to_indices(bits, constellation: Constellation) -> np.ndarray:
    nb = constellation.bits_per_symbol
    w = 1 << np.arange(nb - 1, -1, -1)
    key = np.asarray(bits, dtype=np.int64).reshape(-1, nb) @ w
    lut = np.empty(1 << nb, dtype=np.int64)
    lut[constellation.bit_labels.astype(np.int64) @ w] = np.arange(constellation.size)
    return lut[key]


def demap_llrs(y, constellation: Constellation, noise_var: float, use_prior: bool = True):
    """Exact per-dimension MAP bit LLRs (ln P(0)/P(1)) for complex samples.

    ``noise_var`` is per real dimension. Non-uniform level probabilities
    enter as priors when ``use_prior``.
    """
    from scipy.special import logsumexp

    y = np.asarray(y, dtype=np.complex128)
    lev = constellation.levels
    lab = constellation.level_labels
    nb = lab.shape[1]
    logp = np.log(constellation.level_probabilities) if use_prior else np.zeros(lev.size)
    out = []
    for comp in (y.real, y.imag):
        m = -(comp[:, None] - lev[None, :]) ** 2 / (2.0 * noise_var) + logp[None, :]
        cols = []
        for j in range(nb):
            zero = lab[:, j] == 0
            cols.append(logsumexp(m[:, zero], axis=1) - logsumexp(m[:, ~zero], axis=1))
        out.append(np.stack(cols, axis=1))
    return np.concatenate(out, axis=1).reshape(-1)


def ftn_shape(symbols, alpha: float = 1.0, rolloff: float = DEFAULT_ROLLOFF, sps: int = 4,
              symbol_rate: float = 1.0, span: int = DEFAULT_SPAN) -> ComplexFrame:
    """Upsample and pulse-shape with an RRC compressed by ``alpha``.

    The frame is treated as periodic (circular convolution) and scaled by
    sqrt(sps) so unit-energy symbols give roughly unit sample power.
    """
    s = check_1d(symbols, dtype=np.complex128, name="symbols")
    check_scalar(alpha, "alpha", lo=0.0, hi=1.0, lo_inclusive=False)
    check_scalar(sps, "sps", lo=2, integer=True)
    if alpha < 1 and sps < 4:
        raise ParameterError("FTN shaping needs sps >= 4")
    h = design_rrc(rolloff, span, sps, alpha)
    up = np.zeros(s.size * sps, dtype=np.complex128)
    up[::sps] = s
    y = circular_filter(up, h.taps, h.reference_delay) * math.sqrt(sps)
    return ComplexFrame(y, symbol_rate * sps)


def circular_filter(x: np.ndarray, taps: np.ndarray, reference_delay: int) -> np.ndarray:
    n = x.size
    if taps.size > n:
        raise ParameterError("frame shorter than filter")
    hp = np.zeros(n, dtype=np.result_type(taps, np.complex128))
    hp[:taps.size] = taps
    hp = np.roll(hp, -reference_delay)
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(hp))


def matched_filter(frame: ComplexFrame, alpha: float = 1.0, rolloff: float = DEFAULT_ROLLOFF,
                   symbol_rate: float = 1.0, span: int = DEFAULT_SPAN) -> ComplexFrame:
    """Circular RRC matched filter at the frame's rate (integer sps required);
    output scaled so a symbol-spaced sample equals the transmitted symbol
    for alpha = 1."""
    sps = frame.sample_rate / symbol_rate
    if abs(sps - round(sps)) > 1e-9:
        raise ParameterError("matched filter needs an integer samples-per-symbol")
    sps = int(round(sps))
    h = design_rrc(rolloff, span, sps, alpha)
    y = circular_filter(frame.samples, h.taps, h.reference_delay) / math.sqrt(sps)
    return frame.with_samples(y)


@dataclass(frozen=True)
class FrameLayout:
    preamble_len: int = 512
    payload_len: int = 0
    pilot_tone_freq: float = 0.0
    pilot_tone_power_ratio: float = -12.0

    def __post_init__(self):
        if self.preamble_len < 64:
            raise ParameterError("preamble_len must be >= 64")

    @property
    def frame_len(self) -> int:
        return self.preamble_len + self.payload_len

    @staticmethod
    def default_pilot_freq(symbol_rate: float, alpha: float, rolloff: float) -> float:
        """Just outside the occupied band edge."""
        return 0.55 * alpha * (1.0 + rolloff) * symbol_rate


def insert_pilot_tone(frame: ComplexFrame, layout: FrameLayout) -> ComplexFrame:
    """Add a CW tone ``pilot_tone_power_ratio`` dB relative to the signal."""
    ratio = layout.pilot_tone_power_ratio
    if ratio == -math.inf:
        return frame
    f = layout.pilot_tone_freq
    fs = frame.sample_rate
    if not abs(f) < fs / 2:
        raise ConfigurationError("pilot tone outside the first Nyquist zone")
    bw = occupied_bandwidth(frame, 0.99)
    if abs(f) <= bw / 2:
        raise ConfigurationError(
            f"pilot at {f:.4g} Hz lies inside the 99% signal band (+-{bw / 2:.4g} Hz)")
    amp = math.sqrt(frame.power * 10.0 ** (ratio / 10.0))
    k = np.arange(len(frame))
    return frame.with_samples(frame.samples + amp * np.exp(2j * np.pi * f * k / fs))


def qpsk_preamble(length: int, seed) -> np.ndarray:
    rng = check_rng(seed)
    b = rng.integers(0, 2, size=(length, 2))
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) / math.sqrt(2.0)


def build_frame(payload_symbols, layout: FrameLayout, seed=0):
    """Prepend a seeded constant-modulus QPSK preamble.

    Returns ``(symbols, preamble)``.
    """
    p = check_1d(payload_symbols, dtype=np.complex128, name="payload_symbols")
    if layout.payload_len and p.size != layout.payload_len:
        raise ParameterError(f"payload has {p.size} symbols, layout expects {layout.payload_len}")
    pre = qpsk_preamble(layout.preamble_len, seed)
    return np.concatenate([pre, p]), pre
