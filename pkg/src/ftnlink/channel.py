"""Link impairments: chromatic dispersion, laser phase noise, carrier
frequency offset, timing delay and AWGN set by the power margin."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._validation import check_scalar
from .exceptions import ParameterError
from .sigkit import ComplexFrame

C_LIGHT = 299_792_458.0
NOISE_FREE = -math.inf  # power-margin sentinel that disables AWGN

# independent substreams of the trial seed
_STREAM_PHASE, _STREAM_AWGN = 1, 2


@dataclass(frozen=True)
class ChannelConfig:
    snr_db_at_zero_margin: float = 12.0
    power_margin_db: float = 0.0
    linewidth_hz: float = 200e3
    cfo_hz: float = 0.0
    fiber_len_km: float = 0.0
    dispersion_ps_nm_km: float = 17.0
    center_wavelength_nm: float = 1550.0
    seed: int = 0
    delay_samples: float = 0.0

    def __post_init__(self):
        if self.fiber_len_km < 0:
            raise ParameterError("fiber_len_km must be >= 0")
        if self.linewidth_hz < 0:
            raise ParameterError("linewidth_hz must be >= 0")

    @property
    def noise_free(self) -> bool:
        return self.power_margin_db == NOISE_FREE

    @property
    def snr_db(self) -> float:
        return self.snr_db_at_zero_margin + self.power_margin_db

    @property
    def beta2(self) -> float:
        """Group-velocity dispersion in s^2/m."""
        d = self.dispersion_ps_nm_km * 1e-6  # s/m^2
        lam = self.center_wavelength_nm * 1e-9
        return -d * lam ** 2 / (2.0 * math.pi * C_LIGHT)

    def replace(self, **kw) -> "ChannelConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(config: ChannelConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(config.seed) & 0xFFFFFFFF, stream])


def cd_transfer(n: int, sample_rate: float, config: ChannelConfig, sign: float = 1.0):
    w = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / sample_rate)
    L = config.fiber_len_km * 1e3
    return np.exp(-1j * sign * (config.beta2 / 2.0) * w ** 2 * L)


def apply_cd(frame: ComplexFrame, config: ChannelConfig) -> ComplexFrame:
    """All-pass dispersion exp(-j beta2/2 w^2 L), applied circularly."""
    if config.fiber_len_km == 0:
        return frame
    H = cd_transfer(len(frame), frame.sample_rate, config)
    return frame.with_samples(np.fft.ifft(np.fft.fft(frame.samples) * H))


def wiener_phase(n: int, sample_rate: float, linewidth_hz: float, rng) -> np.ndarray:
    if linewidth_hz == 0:
        return np.zeros(n)
    var = 2.0 * np.pi * linewidth_hz / sample_rate
    inc = rng.normal(0.0, math.sqrt(var), size=n)
    inc[0] = 0.0
    return np.cumsum(inc)


def apply_phase_noise(frame: ComplexFrame, config: ChannelConfig, return_phase: bool = False):
    """Combined Tx+LO laser phase noise as one Wiener process."""
    theta = wiener_phase(len(frame), frame.sample_rate, config.linewidth_hz,
                         _rng(config, _STREAM_PHASE))
    out = frame if config.linewidth_hz == 0 else frame.with_samples(
        frame.samples * np.exp(1j * theta))
    return (out, theta) if return_phase else out


def apply_cfo(frame: ComplexFrame, config: ChannelConfig) -> ComplexFrame:
    if config.cfo_hz == 0:
        return frame
    if not abs(config.cfo_hz) < frame.sample_rate / 2:
        raise ParameterError("carrier frequency offset aliases at this sample rate")
    k = np.arange(len(frame))
    return frame.with_samples(frame.samples * np.exp(2j * np.pi * config.cfo_hz * k / frame.sample_rate))


def apply_delay(frame: ComplexFrame, delay_samples: float) -> ComplexFrame:
    """Circular (possibly fractional) delay by a linear phase."""
    if delay_samples == 0:
        return frame
    n = len(frame)
    if float(delay_samples).is_integer():
        return frame.with_samples(np.roll(frame.samples, int(delay_samples)))
    f = np.fft.fftfreq(n)
    return frame.with_samples(np.fft.ifft(np.fft.fft(frame.samples) *
                                          np.exp(-2j * np.pi * f * delay_samples)))


def awgn_variance(signal_power: float, snr_db: float, sample_rate: float,
                  symbol_rate: float | None = None) -> float:
    """Complex noise variance per sample for a symbol-rate-referred SNR
    (per-sample SNR when ``symbol_rate`` is None)."""
    osr = 1.0 if symbol_rate is None else sample_rate / symbol_rate
    return signal_power * osr / 10.0 ** (snr_db / 10.0)


def apply_awgn(frame: ComplexFrame, config: ChannelConfig, symbol_rate: float | None = None,
               signal_power: float | None = None) -> ComplexFrame:
    """Circular complex Gaussian noise at SNR = snr0 + margin (dB)."""
    if config.noise_free:
        return frame
    check_scalar(config.snr_db, "snr_db")
    p = frame.power if signal_power is None else signal_power
    var = awgn_variance(p, config.snr_db, frame.sample_rate, symbol_rate)
    rng = _rng(config, _STREAM_AWGN)
    n = rng.normal(size=(len(frame), 2)) @ np.array([1.0, 1j]) * math.sqrt(var / 2.0)
    return frame.with_samples(frame.samples + n)


def apply_channel(frame: ComplexFrame, config: ChannelConfig, symbol_rate: float | None = None,
                  phase_noise: bool = True) -> ComplexFrame:
    """CD, then delay, phase noise, CFO and AWGN."""
    out = apply_cd(frame, config)
    out = apply_delay(out, config.delay_samples)
    if phase_noise:
        out = apply_phase_noise(out, config)
    out = apply_cfo(out, config)
    return apply_awgn(out, config, symbol_rate)
