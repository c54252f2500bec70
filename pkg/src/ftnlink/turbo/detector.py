"""Per-dimension BCJR sequence detection over an ISI trellis built from the
original PAM alphabet and the effective filter h_SD = h_PR * h_PF."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .._kernels import isi_bcjr
from .._validation import check_1d
from ..exceptions import ComplexityError, ParameterError
from ..sigkit import FirFilter
from .fec import LLR_CLAMP

MAX_STATES = 4096


def gray_labels(n_levels: int) -> np.ndarray:
    """Reflected Gray labels (MSB first) for ascending PAM levels."""
    nb = int(np.log2(n_levels))
    if 1 << nb != n_levels:
        raise ParameterError("number of PAM levels must be a power of two")
    g = np.arange(n_levels) ^ (np.arange(n_levels) >> 1)
    return ((g[:, None] >> np.arange(nb - 1, -1, -1)) & 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class TrellisSpec:
    """State = the last len(h_sd)-1 symbols, most recent in the top digit."""

    pam_levels: np.ndarray
    h_sd: np.ndarray
    bit_labels: np.ndarray
    next_state: np.ndarray = field(repr=False)
    branch_out: np.ndarray = field(repr=False)
    state_digits: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_branches(self) -> int:
        return self.next_state.size

    @property
    def memory(self) -> int:
        return self.h_sd.size - 1

    @property
    def bits_per_symbol(self) -> int:
        return self.bit_labels.shape[1]

    def head_outputs(self, history=None) -> np.ndarray:
        """Branch outputs for the first ``memory`` steps given the symbols
        preceding the block (most recent first); missing history is zero."""
        mem = self.memory
        if mem == 0:
            return np.zeros((0, 1, self.pam_levels.size))
        hist = np.zeros(mem) if history is None else np.asarray(history, dtype=np.float64)[:mem]
        if hist.size < mem:
            hist = np.concatenate([hist, np.zeros(mem - hist.size)])
        out = np.empty((mem, self.n_states, self.pam_levels.size))
        lev = self.pam_levels
        for k in range(mem):
            # at step k, state digit m-1 is s_{k-m}: real for m <= k, history otherwise
            acc = np.broadcast_to(self.h_sd[0] * lev, (self.n_states, lev.size)).copy()
            for m in range(1, mem + 1):
                if m <= k:
                    acc += self.h_sd[m] * lev[self.state_digits[:, m - 1]][:, None]
                else:
                    acc += self.h_sd[m] * hist[m - k - 1]
            out[k] = acc
        return out


def build_trellis(pam_levels, h_sd, bit_labels=None, max_states: int = MAX_STATES) -> TrellisSpec:
    levels = check_1d(pam_levels, dtype=np.float64, name="pam_levels", min_len=2)
    taps = np.real(h_sd.taps if isinstance(h_sd, FirFilter) else np.asarray(h_sd)).astype(np.float64)
    taps = check_1d(taps, name="h_sd")
    L = levels.size
    mem = taps.size - 1
    n_states = L ** mem
    if n_states > max_states:
        raise ComplexityError(f"trellis needs {n_states} states (cap {max_states})")
    labels = gray_labels(L) if bit_labels is None else np.asarray(bit_labels, dtype=np.int8)
    st = np.arange(n_states)
    # digit m-1 (m = 1..mem) of a state is s_{k-m}
    digits = np.empty((n_states, mem), dtype=np.int64)
    for m in range(mem):
        digits[:, m] = (st // L ** (mem - 1 - m)) % L
    x = np.arange(L)
    if mem:
        nxt = x[None, :] * L ** (mem - 1) + (st // L)[:, None]
        past = (taps[1:][None, :] * levels[digits]).sum(axis=1)
    else:
        nxt = np.zeros((1, L), dtype=np.int64)
        past = np.zeros(1)
    out = taps[0] * levels[None, :] + past[:, None]
    return TrellisSpec(levels, taps, labels, np.ascontiguousarray(nxt, dtype=np.int64),
                       np.ascontiguousarray(out), digits)


def symbol_log_prior(prior_llrs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """log P(x) up to a per-step constant from independent bit LLRs."""
    nb = labels.shape[1]
    llr = prior_llrs.reshape(-1, nb)
    sgn = 1.0 - 2.0 * labels.astype(np.float64)
    return 0.5 * llr @ sgn.T


def app_to_bit_llrs(app: np.ndarray, labels: np.ndarray) -> np.ndarray:
    nb = labels.shape[1]
    out = np.empty((app.shape[0], nb))
    for j in range(nb):
        zero = labels[:, j] == 0
        out[:, j] = logsumexp(app[:, zero], axis=1) - logsumexp(app[:, ~zero], axis=1)
    return out.reshape(-1)


def bcjr_detect(samples, trellis: TrellisSpec, prior_llrs=None, noise_var: float = 1.0,
                history=None, exact: bool = True, llr_clamp: float = LLR_CLAMP) -> np.ndarray:
    """Extrinsic Gray-bit LLRs (ln P(0)/P(1)) for one real dimension.

    ``history`` lists the symbol values preceding the block, most recent
    first, so the first samples' ISI is accounted for.
    """
    y = check_1d(samples, dtype=np.float64, name="samples")
    if not noise_var > 0:
        raise ParameterError("noise_var must be positive")
    nb = trellis.bits_per_symbol
    if prior_llrs is None:
        prior = np.zeros(y.size * nb)
    else:
        prior = check_1d(prior_llrs, dtype=np.float64, name="prior_llrs")
        if prior.size != y.size * nb:
            raise ParameterError("prior_llrs must hold bits_per_symbol LLRs per sample")
    logp = np.ascontiguousarray(symbol_log_prior(prior, trellis.bit_labels))
    head = np.ascontiguousarray(trellis.head_outputs(history))
    if head.shape[1] != trellis.n_states:
        head = np.zeros((0, trellis.n_states, trellis.pam_levels.size))
    app = isi_bcjr(y, trellis.branch_out, head, trellis.next_state, logp, float(noise_var), exact)
    post = app_to_bit_llrs(app, trellis.bit_labels)
    return np.clip(post - prior, -llr_clamp, llr_clamp)


def map_demap_pam(samples, pam_levels, labels, noise_var, level_prior=None) -> np.ndarray:
    """Memoryless exact MAP bit LLRs for PAM samples (closed form)."""
    y = np.asarray(samples, dtype=np.float64)
    lev = np.asarray(pam_levels, dtype=np.float64)
    metric = -(y[:, None] - lev[None, :]) ** 2 / (2.0 * noise_var)
    if level_prior is not None:
        metric = metric + np.log(np.asarray(level_prior, dtype=np.float64))[None, :]
    return app_to_bit_llrs(metric, np.asarray(labels))
