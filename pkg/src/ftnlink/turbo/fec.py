"""Punctured recursive systematic convolutional code with log-MAP decoding.

Mother code: rate-1/2 RSC with feedback 7 and feedforward 5 (octal),
memory 2, terminated with two tail steps. Parity is punctured by a
periodic keep-pattern; the default ``(1, 0, 0)`` gives rate 3/4.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .._kernels import rsc_encode, rsc_log_map
from .._validation import check_1d, check_bits
from ..exceptions import ParameterError

MEMORY = 2
LLR_CLAMP = 30.0


@dataclass(frozen=True)
class FecCodec:
    n_info: int
    puncture: tuple[int, ...] = (1, 0, 0)
    seed: int = 0x5EED
    exact: bool = True
    llr_clamp: float = LLR_CLAMP

    def __post_init__(self):
        if not self.puncture or not any(self.puncture):
            raise ParameterError("puncture pattern must keep at least one parity bit")
        if self.n_info < 1 or self.n_info % len(self.puncture):
            raise ParameterError(
                f"n_info={self.n_info} must be a positive multiple of the puncture period "
                f"{len(self.puncture)}")

    @property
    def rate(self) -> float:
        p = len(self.puncture)
        return p / (p + sum(self.puncture))

    def n_parity_for(self, n_info: int) -> int:
        """Transmitted non-systematic bits (kept parity plus tail) for a block."""
        period = len(self.puncture)
        full, rest = divmod(int(n_info), period)
        return full * sum(self.puncture) + sum(self.puncture[:rest]) + 2 * MEMORY

    @property
    def n_coded(self) -> int:
        return self.n_info + self.n_parity_for(self.n_info)

    def _keep_mask(self, n: int) -> np.ndarray:
        pat = np.asarray(self.puncture, dtype=bool)
        return np.resize(pat, n)

    @cached_property
    def interleaver(self) -> np.ndarray:
        """Coded-bit permutation: transmitted[j] = natural[perm[j]]."""
        return np.random.default_rng(self.seed).permutation(self.n_coded)

    @cached_property
    def systematic_interleaver(self) -> np.ndarray:
        return np.random.default_rng(self.seed + 1).permutation(self.n_info)

    @cached_property
    def _layout(self):
        """Natural-order positions of systematic, kept parity and tail bits."""
        keep = self._keep_mask(self.n_info)
        per_step = 1 + keep.astype(np.int64)
        start = np.concatenate([[0], np.cumsum(per_step)[:-1]])
        sys_pos = start
        par_pos = start[keep] + 1
        tail0 = int(per_step.sum())
        tail_pos = tail0 + np.arange(2 * MEMORY)
        return sys_pos, par_pos, keep, tail_pos


def interleave(x, codec: FecCodec) -> np.ndarray:
    return np.asarray(x)[codec.interleaver]


def deinterleave(x, codec: FecCodec) -> np.ndarray:
    x = np.asarray(x)
    out = np.empty_like(x)
    out[codec.interleaver] = x
    return out


def _encode_natural(info: np.ndarray, codec: FecCodec) -> np.ndarray:
    par, ts, tp = rsc_encode(info.astype(np.int8), MEMORY)
    sys_pos, par_pos, keep, tail_pos = codec._layout
    out = np.empty(codec.n_coded, dtype=np.int8)
    out[sys_pos] = info
    out[par_pos] = par[keep]
    out[tail_pos] = np.stack([ts, tp], axis=1).reshape(-1)
    return out


def fec_encode(info_bits, codec: FecCodec) -> np.ndarray:
    """RSC-encode, terminate, puncture and interleave one block."""
    info = check_bits(info_bits, "info_bits")
    if info.size != codec.n_info:
        raise ParameterError(f"codec expects {codec.n_info} info bits, got {info.size}")
    return interleave(_encode_natural(info, codec), codec)


def _run_map(lsys_info, lpar_kept, ltail, codec: FecCodec):
    n = codec.n_info
    _, _, keep, _ = codec._layout
    lsys = np.zeros(n + MEMORY)
    lpar = np.zeros(n + MEMORY)
    lsys[:n] = lsys_info
    lpar[:n][keep] = lpar_kept
    lsys[n:] = ltail[0::2]
    lpar[n:] = ltail[1::2]
    return rsc_log_map(lsys, lpar, n, codec.exact)


def fec_bcjr_decode(channel_llrs, priors, codec: FecCodec):
    """Log-MAP decode of one interleaved block.

    ``channel_llrs`` are per transmitted coded bit (ln P(0)/P(1));
    ``priors`` are optional a-priori LLRs on the info bits. Returns
    extrinsic LLRs on the transmitted coded bits (same order as the
    input) and hard info-bit decisions.
    """
    llr = check_1d(channel_llrs, dtype=np.float64, name="channel_llrs")
    if llr.size != codec.n_coded:
        raise ParameterError(f"codec expects {codec.n_coded} coded LLRs, got {llr.size}")
    nat = deinterleave(llr, codec)
    sys_pos, par_pos, keep, tail_pos = codec._layout
    prior = np.zeros(codec.n_info) if priors is None else check_1d(priors, dtype=np.float64)
    post_sys, post_par = _run_map(nat[sys_pos] + prior, nat[par_pos], nat[tail_pos], codec)
    n = codec.n_info
    post = np.empty(codec.n_coded)
    post[sys_pos] = post_sys[:n]
    post[par_pos] = post_par[:n][keep]
    post[tail_pos] = np.stack([post_sys[n:], post_par[n:]], axis=1).reshape(-1)
    ext = np.clip(post - nat, -codec.llr_clamp, codec.llr_clamp)
    info_hat = (post_sys[:n] < 0).astype(np.int8)
    return interleave(ext, codec), info_hat


def encode_systematic(systematic_bits, codec: FecCodec) -> np.ndarray:
    """Parity stream (kept parity then tail bits) for a systematic block.

    Used by PAS, where the systematic bits stay in place on the amplitude
    labels and only the parity stream needs placing. The block is
    permuted by ``codec.systematic_interleaver`` before encoding.
    """
    u = check_bits(systematic_bits, "systematic_bits")
    if u.size != codec.n_info:
        raise ParameterError(f"codec expects {codec.n_info} systematic bits, got {u.size}")
    u = u[codec.systematic_interleaver]
    par, ts, tp = rsc_encode(u, MEMORY)
    _, _, keep, _ = codec._layout
    return np.concatenate([par[keep], np.stack([ts, tp], axis=1).reshape(-1)]).astype(np.int8)


def decode_systematic(sys_llrs, parity_llrs, codec: FecCodec) -> np.ndarray:
    """Hard decisions on the systematic block from its LLRs and the parity stream's."""
    sys_llrs = check_1d(sys_llrs, dtype=np.float64, name="sys_llrs")
    parity_llrs = check_1d(parity_llrs, dtype=np.float64, name="parity_llrs")
    n_par = codec.n_parity_for(codec.n_info)
    if sys_llrs.size != codec.n_info or parity_llrs.size != n_par:
        raise ParameterError("LLR block sizes do not match the codec")
    perm = codec.systematic_interleaver
    n_kept = n_par - 2 * MEMORY
    post_sys, _ = _run_map(sys_llrs[perm], parity_llrs[:n_kept], parity_llrs[n_kept:], codec)
    out = np.empty(codec.n_info, dtype=np.int8)
    out[perm] = (post_sys[:codec.n_info] < 0).astype(np.int8)
    return out
