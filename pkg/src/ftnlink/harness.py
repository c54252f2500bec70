"""End-to-end link trials, power-margin sweeps and result files."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path

import numpy as np

from .channel import NOISE_FREE, ChannelConfig, apply_channel
from .exceptions import ConfigurationError, FtnLinkError, ParameterError
from .ptprdfe import PTPRDFE, PrTarget
from .rxfront import compensate_cd, compensate_cfo, estimate_fo_pilot, synchronize
from .shaping import (ShapingSpec, pas_decode_blocks, pas_encode, pas_layout, solve_ivmb,
                      solve_mb, uniform_spec)
from .sigkit import ComplexFrame, resample
from .turbo import (FecCodec, apply_post_filter, build_trellis, effective_filter,
                    estimate_post_filter, fec_bcjr_decode, fec_encode, turbo_equalize)
from .txchain import (FrameLayout, bits_to_indices, build_frame, demap_llrs, ftn_shape,
                      insert_pilot_tone, matched_filter, pcs_constellation, qam_constellation,
                      qpsk_preamble)

log = logging.getLogger(__name__)

FORMATS = ("FTN16QAM", "PCS64QAM_MB", "PCS64QAM_IVMB")
RECEIVER_MODES = ("hard", "fec_oneshot", "turbo")
HARD_LLR = 20.0
# desk calibration: SNR at zero margin putting the lowest swept margin near BER 1e-2
FTN_SNR0_DB = 15.0
PCS_SNR0_DB = 17.0
# 40 km SMF link with a free-running LO offset
LINK_FIBER_KM = 40.0
LINK_CFO_HZ = 500e6


def _link_channel(snr0_db: float) -> ChannelConfig:
    return ChannelConfig(snr_db_at_zero_margin=snr0_db, fiber_len_km=LINK_FIBER_KM,
                         cfo_hz=LINK_CFO_HZ)


@dataclass(frozen=True)
class LinkConfig:
    format: str = "FTN16QAM"
    baud: float = 45e9
    alpha: float = 0.8
    entropy_2d: float = 4.0
    rolloff: float = 0.1
    sps: int = 4
    rx_sps: int = 2
    span: int = 96
    dac_rate: float = 64e9
    adc_rate: float = 80e9
    preamble_len: int = 512
    pilot_tone_power_ratio: float = -12.0
    pilot_tone_freq: float | None = None
    foe_window_hz: float = 2e9
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    receiver: str = "turbo"
    n_iter: int = 4
    seeds: tuple[int, ...] = tuple(range(20))
    info_bits: int = 1 << 17
    pr_taps: tuple[float, ...] = (1.0, 1.0)
    n_ff: int = 31
    n_fb: int = 4
    mu_train: float = 5e-3
    mu_track: float = 1e-4
    mu_fb: float = 1e-3
    mu_phase: float = 5e-2
    train_passes: int = 20
    fec_puncture: tuple[int, ...] = (1, 0, 0)
    fec_seed: int = 0x5EED
    block_len: int = 96
    max_delay_samples: float = 200.0
    guard_symbols: int = 160

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}")
        if self.receiver not in RECEIVER_MODES:
            raise ConfigurationError(f"receiver must be one of {RECEIVER_MODES}")
        if self.is_ftn:
            if not self.alpha < 1:
                raise ConfigurationError("FTN formats need alpha < 1")
            if self.entropy_2d != 4.0:
                raise ConfigurationError("FTN16QAM carries uniform 16QAM (entropy_2d = 4)")
        elif self.alpha != 1.0:
            raise ConfigurationError("PCS formats are Nyquist-shaped (alpha = 1)")
        if self.n_iter < 1:
            raise ConfigurationError("n_iter must be >= 1")
        if isinstance(self.channel, dict):
            object.__setattr__(self, "channel", ChannelConfig(**self.channel))
        for name in ("seeds", "pr_taps", "fec_puncture"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def is_ftn(self) -> bool:
        return self.format == "FTN16QAM"

    @property
    def occupied_band_hz(self) -> float:
        return self.alpha * (1 + self.rolloff) * self.baud

    @property
    def pilot_freq(self) -> float:
        if self.pilot_tone_freq is not None:
            return self.pilot_tone_freq
        return FrameLayout.default_pilot_freq(self.baud, self.alpha, self.rolloff)

    def replace(self, **kw) -> "LinkConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "channel" in d and isinstance(d["channel"], dict):
            d["channel"] = ChannelConfig(**d["channel"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "LinkConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def ftn_config(**kw) -> LinkConfig:
    """45 GBd alpha=0.8 FTN-16QAM with PT-PRDFE and turbo equalization."""
    base = dict(format="FTN16QAM", baud=45e9, alpha=0.8, entropy_2d=4.0,
                channel=_link_channel(FTN_SNR0_DB))
    base.update(kw)
    return LinkConfig(**base)


def pcs_config(distribution: str = "MB", **kw) -> LinkConfig:
    """36 GBd PCS-64QAM, entropy 5, PAS with the rate-3/4 code."""
    fmt = {"MB": "PCS64QAM_MB", "IVMB": "PCS64QAM_IVMB"}[distribution.upper()]
    base = dict(format=fmt, baud=36e9, alpha=1.0, entropy_2d=5.0, pr_taps=(1.0,),
                receiver="fec_oneshot", channel=_link_channel(PCS_SNR0_DB))
    base.update(kw)
    return LinkConfig(**base)


@dataclass
class MetricsRecord:
    config_digest: str
    format: str
    power_margin_db: float
    seed: int
    pre_fec_ber: float = math.nan
    post_fec_ber: float = math.nan
    ser: float = math.nan
    evm_percent: float = math.nan
    per_iteration_ber: list = field(default_factory=list)
    bit_count: int = 0
    error_count: int = 0
    elapsed_seconds: float = 0.0
    failed: bool = False
    reason: str = ""
    diagnostics: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.failed:
            for name in ("pre_fec_ber", "post_fec_ber"):
                v = getattr(self, name)
                if not 0.0 <= v <= 1.0:
                    raise ParameterError(f"{name}={v} outside [0, 1]")
            if self.bit_count <= 0 or not 0 <= self.error_count <= self.bit_count:
                raise ParameterError("inconsistent bit/error counts")

    def reproducible_fields(self) -> tuple:
        """Everything except wall-clock time and diagnostics."""
        return (self.config_digest, self.format, self.power_margin_db, self.seed,
                self.pre_fec_ber, self.post_fec_ber, self.ser, self.evm_percent,
                tuple(self.per_iteration_ber), self.bit_count, self.error_count,
                self.failed, self.reason)


# ---------------------------------------------------------------------------
# trial pipeline


def _frame_multiple(cfg: LinkConfig) -> int:
    """Smallest symbol count granularity that keeps every rate conversion exact."""
    dens = []
    for rate in (cfg.sps * cfg.baud, cfg.dac_rate, cfg.adc_rate, cfg.rx_sps * cfg.baud):
        dens.append(Fraction(rate / cfg.baud).limit_denominator(10 ** 6).denominator)
    return reduce(math.lcm, dens, 1)


def _substream(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xF7A, k])


@dataclass
class TxFrame:
    symbols: np.ndarray
    preamble: np.ndarray
    payload_len: int
    info_bits: np.ndarray
    coded_bits: np.ndarray
    payload_idx: np.ndarray
    constellation: object
    codec: FecCodec
    waveform: ComplexFrame
    layout: FrameLayout
    shaping: ShapingSpec | None = None
    pas_symbols: int = 0


def shaping_spec_for(cfg: LinkConfig) -> ShapingSpec:
    if cfg.format == "PCS64QAM_MB":
        spec = solve_mb((1, 3, 5, 7), cfg.entropy_2d)
    elif cfg.format == "PCS64QAM_IVMB":
        spec = solve_ivmb((1, 3, 5, 7), cfg.entropy_2d)
    else:
        raise ConfigurationError("shaping applies to PCS formats only")
    return spec.with_composition(cfg.block_len)


def ftn_codec(cfg: LinkConfig) -> FecCodec:
    period = len(cfg.fec_puncture)
    n = (cfg.info_bits // period) * period
    codec = FecCodec(n, cfg.fec_puncture, cfg.fec_seed)
    if codec.n_coded % 4:
        raise ConfigurationError("FTN codeword does not fill whole 16QAM symbols")
    return codec


def pcs_frame_plan(cfg: LinkConfig, spec: ShapingSpec):
    """Choose the PAS frame (multiple of block_len/2 symbols) nearest the info target."""
    template = FecCodec(len(cfg.fec_puncture), cfg.fec_puncture, cfg.fec_seed)
    step = spec.block_len // 2
    approx = max(step, int(round(cfg.info_bits / (cfg.entropy_2d - 1.5) / step)) * step)
    for n in range(approx, approx + 64 * step, step):
        try:
            lay = pas_layout(spec, template, n)
        except ConfigurationError:
            continue
        if lay.n_systematic % len(cfg.fec_puncture) == 0:
            codec = FecCodec(lay.n_systematic, cfg.fec_puncture, cfg.fec_seed)
            return n, lay, codec
    raise ConfigurationError("no PAS frame size fits the FEC configuration")


def build_tx(cfg: LinkConfig, seed: int) -> TxFrame:
    rng = _substream(seed, 1)
    spec = None
    n_pas = 0
    if cfg.is_ftn:
        const = qam_constellation(16)
        codec = ftn_codec(cfg)
        info = rng.integers(0, 2, codec.n_info).astype(np.int8)
        coded = fec_encode(info, codec)
        idx = bits_to_indices(coded, const)
    else:
        spec = shaping_spec_for(cfg)
        const = pcs_constellation(spec)
        n_pas, lay, codec = pcs_frame_plan(cfg, spec)
        info = rng.integers(0, 2, lay.n_info).astype(np.int8)
        idx = pas_encode(info, spec, codec, n_pas)
        coded = const.bit_labels[idx].reshape(-1)
    payload = const.points[idx]
    layout = FrameLayout(cfg.preamble_len, payload.size, cfg.pilot_freq, cfg.pilot_tone_power_ratio)
    symbols, pre = build_frame(payload, layout, seed=_substream(seed, 2))
    # the burst sits between silent guards so that circular processing
    # (FFT resampling, CD) never wraps signal onto itself
    g = cfg.guard_symbols
    total = symbols.size + 2 * g
    tail = g + (-total) % _frame_multiple(cfg)
    burst = np.concatenate([np.zeros(g, complex), symbols, np.zeros(tail, complex)])
    wave = ftn_shape(burst, cfg.alpha, cfg.rolloff, cfg.sps, cfg.baud, cfg.span)
    wave = wave.with_samples(wave.samples * math.sqrt(burst.size / symbols.size))
    wave = insert_pilot_tone(wave, layout)
    wave = wave.with_samples(wave.samples / math.sqrt(wave.power))
    return TxFrame(symbols, pre, payload.size, info, coded, idx, const, codec, wave, layout,
                   spec, n_pas)


def _channel_for(cfg: LinkConfig, margin_db: float, seed: int) -> ChannelConfig:
    rng = _substream(seed, 4)
    delay = float(rng.uniform(0, cfg.max_delay_samples)) if cfg.max_delay_samples else 0.0
    return cfg.channel.replace(power_margin_db=margin_db, seed=int(seed), delay_samples=delay)


def transmit(cfg: LinkConfig, tx: TxFrame, margin_db: float, seed: int) -> ComplexFrame:
    """DAC resampling, analog path to the ADC rate, then impairments."""
    dac = resample(tx.waveform, cfg.dac_rate)
    adc = resample(dac, cfg.adc_rate)
    return apply_channel(adc, _channel_for(cfg, margin_db, seed), symbol_rate=cfg.baud)


@dataclass
class RxFront:
    samples: np.ndarray
    center0: int
    cfo_estimate: float


def receive_front(cfg: LinkConfig, tx: TxFrame, rx: ComplexFrame, margin_db: float,
                  seed: int) -> RxFront:
    """Resampling, FOE, CDC, matched filtering, AGC and synchronization."""
    ch = _channel_for(cfg, margin_db, seed)
    x = resample(rx, cfg.rx_sps * cfg.baud)
    fo = estimate_fo_pilot(x, tx.layout, cfg.foe_window_hz)
    x = compensate_cfo(x, fo)
    x = compensate_cd(x, ch)
    x = matched_filter(x, cfg.alpha, cfg.rolloff, cfg.baud, cfg.span)
    x = x.with_samples(x.samples / math.sqrt(x.power))
    sym_off, phase = synchronize(x, tx.preamble, cfg.rx_sps)
    lag = sym_off * cfg.rx_sps + phase
    guard = cfg.n_ff
    samples = np.roll(x.samples, guard - lag)
    return RxFront(samples, guard, fo)


def _ber(a, b) -> tuple[float, int]:
    err = int(np.count_nonzero(np.asarray(a) != np.asarray(b)))
    return err / max(len(a), 1), err


def run_trial(config: LinkConfig, margin_db: float, seed: int,
              keep_diagnostics: bool = False) -> MetricsRecord:
    """One Tx -> channel -> Rx frame. Component failures are recorded, not raised."""
    t0 = time.perf_counter()
    rec = MetricsRecord(config.digest(), config.format, float(margin_db), int(seed),
                        failed=True, reason="")
    try:
        tx = build_tx(config, seed)
        rx = transmit(config, tx, margin_db, seed)
        front = receive_front(config, tx, rx, margin_db, seed)
        if config.is_ftn:
            _receive_ftn(config, tx, front, rec, keep_diagnostics)
        else:
            _receive_pcs(config, tx, front, rec, keep_diagnostics)
        rec.failed = False
    except FtnLinkError as exc:
        rec.failed = True
        rec.reason = f"{type(exc).__name__}: {exc}"
        log.warning("trial failed (%s, margin %s, seed %s): %s", config.format, margin_db, seed,
                    rec.reason)
    rec.elapsed_seconds = time.perf_counter() - t0
    return rec


def _equalize(cfg: LinkConfig, tx: TxFrame, front: RxFront, pr_taps):
    eq = PTPRDFE(pr_taps=pr_taps, n_ff=cfg.n_ff, n_fb=cfg.n_fb, mu_train=cfg.mu_train,
                 mu_track=cfg.mu_track, mu_fb=cfg.mu_fb, mu_phase=cfg.mu_phase,
                 train_passes=cfg.train_passes, sps=cfg.rx_sps)
    eq.fit(front.samples, tx.preamble, center0=front.center0)
    n_total = cfg.preamble_len + tx.payload_len
    y = eq.transform(front.samples, tx.constellation, n_symbols=n_total)
    return eq, y


def _receive_ftn(cfg, tx: TxFrame, front: RxFront, rec: MetricsRecord, keep: bool):
    const = tx.constellation
    target = PrTarget(np.asarray(cfg.pr_taps))
    eq, y_all = _equalize(cfg, tx, front, target.taps)
    P = cfg.preamble_len
    dec_all = eq.decisions_
    y = y_all[P:]
    dec = dec_all[P:]
    payload = tx.symbols[P:P + tx.payload_len]
    d_hat = target.reference(dec_all)[P:]
    d_true = target.reference(tx.symbols[:P + tx.payload_len])[P:]
    rec.ser = float(np.mean(const.nearest(dec) != tx.payload_idx))  # refined below
    rec.evm_percent = float(100 * np.sqrt(np.mean(np.abs(y - d_true) ** 2) /
                                          np.mean(np.abs(d_true) ** 2)))
    h_pf, pf_info = estimate_post_filter(y, d_hat)
    yw = apply_post_filter(y, h_pf, previous=y_all[P - 1::-1][:len(h_pf) - 1])
    h_sd = effective_filter(target, h_pf)
    d_sd = np.convolve(dec_all, h_sd.taps)[:dec_all.size][P:]
    resid = yw - d_sd
    noise_var = (max(float(np.var(resid.real)), 1e-6), max(float(np.var(resid.imag)), 1e-6))
    trellis = build_trellis(const.levels, h_sd, const.level_labels)
    hist = tx.preamble[::-1]
    if cfg.receiver == "hard":
        coded_hat = const.bit_labels[const.nearest(dec)].reshape(-1)
        rec.pre_fec_ber, _ = _ber(coded_hat, tx.coded_bits)
        _, info_hat = fec_bcjr_decode(HARD_LLR * (1.0 - 2.0 * coded_hat), None, tx.codec)
        trace = []
    else:
        n_iter = 1 if cfg.receiver == "fec_oneshot" else cfg.n_iter
        info_hat, trace, det = turbo_equalize(yw.real, yw.imag, trellis, tx.codec, noise_var,
                                              n_iter, tx.info_bits, hist.real, hist.imag,
                                              return_details=True)
        first = det["detector_llrs_first"] < 0
        rec.pre_fec_ber, _ = _ber(first, tx.coded_bits)
        # the DFE slicer propagates errors through its PR reference, so the
        # symbol error rate is read from the first detector pass instead
        nb = const.bits_per_symbol
        wrong = (first != tx.coded_bits.astype(bool)).reshape(-1, nb).any(axis=1)
        rec.ser = float(np.mean(wrong))
    rec.post_fec_ber, rec.error_count = _ber(info_hat, tx.info_bits)
    rec.bit_count = int(tx.info_bits.size)
    rec.per_iteration_ber = trace
    rec.diagnostics = {"eta": pf_info["eta"], "lag1_before": pf_info["lag1_before"],
                       "lag1_after": pf_info["lag1_after"], "noise_var": noise_var,
                       "cfo_estimate": front.cfo_estimate}
    if keep:
        rec.diagnostics.update(y=y, decisions=dec, phase=eq.phase_trace_, payload=payload)


def _receive_pcs(cfg, tx: TxFrame, front: RxFront, rec: MetricsRecord, keep: bool):
    const = tx.constellation
    eq, y_all = _equalize(cfg, tx, front, (1.0,))
    P = cfg.preamble_len
    y = y_all[P:]
    dec_idx = const.nearest(eq.decisions_[P:])
    ref = const.points[tx.payload_idx]
    rec.ser = float(np.mean(dec_idx != tx.payload_idx))
    rec.evm_percent = float(100 * np.sqrt(np.mean(np.abs(y - ref) ** 2) /
                                          np.mean(np.abs(ref) ** 2)))
    hard_bits = const.bit_labels[dec_idx].reshape(-1)
    rec.pre_fec_ber, _ = _ber(hard_bits, tx.coded_bits)
    resid = y - eq.decisions_[P:]
    nv = max(float(np.mean(np.abs(resid) ** 2) / 2), 1e-6)
    if cfg.receiver == "hard":
        llr = HARD_LLR * (1.0 - 2.0 * hard_bits)
    else:
        llr = demap_llrs(y, const, nv)
    info_hat, failed = pas_decode_blocks(llr, tx.shaping, tx.codec, tx.pas_symbols)
    rec.post_fec_ber, rec.error_count = _ber(info_hat, tx.info_bits)
    rec.bit_count = int(tx.info_bits.size)
    rec.per_iteration_ber = [rec.post_fec_ber]
    rec.diagnostics = {"noise_var": nv, "failed_blocks": int(failed.sum()),
                       "cfo_estimate": front.cfo_estimate}
    if keep:
        rec.diagnostics.update(y=y, decisions=eq.decisions_[P:], phase=eq.phase_trace_)


# ---------------------------------------------------------------------------
# sweeps


def _trial_job(args):
    return run_trial(*args)


def sweep(config: LinkConfig, margins, seeds=None, progress=None,
          n_jobs: int = 1) -> list[MetricsRecord]:
    """All (margin, seed) trials, margin-major. ``n_jobs > 1`` uses a process pool."""
    margins = list(margins)
    if not margins:
        raise ParameterError("margins must be non-empty")
    seeds = list(config.seeds if seeds is None else seeds)
    jobs = [(config, float(m), int(s)) for m in margins for s in seeds]
    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(n_jobs) as pool:
            out = []
            for rec in pool.map(_trial_job, jobs):
                out.append(rec)
                if progress:
                    progress(rec)
            return out
    out = []
    for job in jobs:
        rec = _trial_job(job)
        out.append(rec)
        if progress:
            progress(rec)
    return out


def aggregate(records) -> list[dict]:
    """Mean BERs per (format, margin), pooled over seeds (failed trials skipped)."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.format, r.power_margin_db), []).append(r)
    rows = []
    for (fmt, m), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        ok = [r for r in rs if not r.failed]
        n_iter = max((len(r.per_iteration_ber) for r in ok), default=0)
        row = {
            "format": fmt,
            "margin_db": m,
            "n_trials": len(rs),
            "n_failed": len(rs) - len(ok),
            "pre_fec_ber": float(np.mean([r.pre_fec_ber for r in ok])) if ok else math.nan,
            "post_fec_ber": float(np.mean([r.post_fec_ber for r in ok])) if ok else math.nan,
            "ser": float(np.mean([r.ser for r in ok])) if ok else math.nan,
            "evm_percent": float(np.mean([r.evm_percent for r in ok])) if ok else math.nan,
            "bit_count": int(sum(r.bit_count for r in ok)),
            "error_count": int(sum(r.error_count for r in ok)),
        }
        for i in range(n_iter):
            vals = [r.per_iteration_ber[i] for r in ok if len(r.per_iteration_ber) > i]
            row[f"iter_ber_{i + 1}"] = float(np.mean(vals)) if vals else math.nan
        rows.append(row)
    return rows


def margin_at_ber(sweep_result, ber_threshold: float, key: str = "post_fec_ber"):
    """Margin where the seed-averaged BER crosses ``ber_threshold``.

    ``sweep_result`` is a list of MetricsRecord, aggregate rows, or
    ``(margin, ber)`` pairs. Interpolates log10(BER) linearly in margin
    between the bracketing points; returns None when not bracketed.
    """
    pts = _curve(sweep_result, key)
    if not pts:
        return None
    for m, b, _ in pts:
        if b == ber_threshold:
            return float(m)
    lt = math.log10(ber_threshold)
    for (m0, b0, n0), (m1, b1, n1) in zip(pts, pts[1:]):
        if (b0 - ber_threshold) * (b1 - ber_threshold) >= 0:
            continue
        # zero-error points stand in at half an error over their bit count
        f0 = b0 if b0 > 0 else (0.5 / n0 if n0 else 0.0)
        f1 = b1 if b1 > 0 else (0.5 / n1 if n1 else 0.0)
        if f0 <= 0 or f1 <= 0:
            continue
        l0, l1 = math.log10(f0), math.log10(f1)
        if l0 == l1:
            continue
        return float(m0 + (lt - l0) * (m1 - m0) / (l1 - l0))
    return None


def compare_margins(configs, margins, ber_threshold: float = 1e-3, seeds=None,
                    key: str = "post_fec_ber", n_jobs: int = 1, progress=None):
    """Sweep each config and return ``[(config, margin_at_ber, records)]``.

    Margin deltas are read relative to the first entry.
    """
    out = []
    for cfg in configs:
        recs = sweep(cfg, margins, seeds, progress, n_jobs)
        out.append((cfg, margin_at_ber(recs, ber_threshold, key), recs))
    return out


def _curve(sweep_result, key):
    items = list(sweep_result)
    if not items:
        return []
    if isinstance(items[0], MetricsRecord):
        items = aggregate(items)
    pts = []
    for it in items:
        if isinstance(it, dict):
            pts.append((float(it["margin_db"]), float(it[key]), int(it.get("bit_count", 0))))
        else:
            m, b = it[:2]
            pts.append((float(m), float(b), int(it[2]) if len(it) > 2 else 0))
    pts = [p for p in pts if not math.isnan(p[1])]
    return sorted(pts)


# ---------------------------------------------------------------------------
# CSV


def csv_columns(n_iter: int) -> list[str]:
    return (["format", "margin_db", "seed", "pre_fec_ber", "post_fec_ber", "ser", "evm_percent"]
            + [f"iter_ber_{i + 1}" for i in range(n_iter)]
            + ["bit_count", "error_count", "elapsed_seconds", "status"])


def write_records_csv(records, path) -> None:
    records = list(records)
    n_iter = max((len(r.per_iteration_ber) for r in records), default=0)
    cols = csv_columns(n_iter)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in records:
            row = {"format": r.format, "margin_db": repr(r.power_margin_db), "seed": r.seed,
                   "pre_fec_ber": repr(r.pre_fec_ber), "post_fec_ber": repr(r.post_fec_ber),
                   "ser": repr(r.ser), "evm_percent": repr(r.evm_percent),
                   "bit_count": r.bit_count, "error_count": r.error_count,
                   "elapsed_seconds": repr(r.elapsed_seconds),
                   "status": ("failed: " + r.reason) if r.failed else "ok"}
            for i in range(n_iter):
                row[f"iter_ber_{i + 1}"] = (repr(r.per_iteration_ber[i])
                                            if i < len(r.per_iteration_ber) else "")
            w.writerow(row)


def read_records_csv(path, config_digest: str = "") -> list[MetricsRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            iters = sorted((k for k in row if k.startswith("iter_ber_")),
                           key=lambda k: int(k.rsplit("_", 1)[1]))
            status = row.get("status", "ok")
            failed = status != "ok"
            out.append(MetricsRecord(
                config_digest, row["format"], float(row["margin_db"]), int(row["seed"]),
                float(row["pre_fec_ber"]), float(row["post_fec_ber"]), float(row["ser"]),
                float(row["evm_percent"]), [float(row[k]) for k in iters if row[k] != ""],
                int(row["bit_count"]), int(row["error_count"]), float(row["elapsed_seconds"]),
                failed, status[len("failed: "):] if failed else ""))
    return out


def write_summary_csv(rows, path) -> None:
    rows = list(rows)
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
