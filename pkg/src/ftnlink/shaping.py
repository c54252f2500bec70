"""Probabilistic amplitude shaping.

Maxwell-Boltzmann (MB) and inverse MB (IvMB) amplitude distributions solved
for a target entropy, constant-composition distribution matching (CCDM) and
the PAS framing that puts FEC parity on the sign bits of PCS-QAM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_1d, check_bits, check_scalar
from .exceptions import ConfigurationError, DecodeError, ParameterError

ENTROPY_TOL = 1e-9
DEFAULT_BLOCK_LEN = 96


@dataclass(frozen=True, eq=False)
class ShapingSpec:
    """A solved (or hand-specified) amplitude distribution.

    ``target_entropy_2d`` counts the two sign bits, i.e. it equals
    ``2 * (H_amp + 1)`` for the per-dimension amplitude entropy ``H_amp``.
    """

    amplitude_alphabet: np.ndarray
    probabilities: np.ndarray
    lam: float = 0.0
    target_entropy_2d: float = float("nan")
    block_len: int = DEFAULT_BLOCK_LEN
    composition: tuple[int, ...] | None = None
    kind: str = "custom"

    def __post_init__(self):
        a = np.asarray(self.amplitude_alphabet, dtype=np.float64)
        p = np.asarray(self.probabilities, dtype=np.float64)
        if a.ndim != 1 or a.size < 1 or np.any(a <= 0) or np.any(np.diff(a) <= 0):
            raise ParameterError("amplitude_alphabet must be sorted, distinct and positive")
        if p.shape != a.shape or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ParameterError("probabilities must be non-negative and sum to 1")
        a.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "amplitude_alphabet", a)
        object.__setattr__(self, "probabilities", p)
        if self.composition is not None:
            comp = tuple(int(c) for c in self.composition)
            if len(comp) != a.size or any(c < 0 for c in comp) or sum(comp) != self.block_len:
                raise ParameterError("composition must have one non-negative count per "
                                     "amplitude summing to block_len")
            object.__setattr__(self, "composition", comp)

    @property
    def amplitude_entropy(self) -> float:
        return entropy_bits(self.probabilities)

    @property
    def entropy_2d(self) -> float:
        return 2.0 * (self.amplitude_entropy + 1.0)

    @property
    def mean_energy_2d(self) -> float:
        """E[|x|^2] of the unnormalized 2-D symbol (two independent dimensions)."""
        return 2.0 * float(np.sum(self.probabilities * self.amplitude_alphabet ** 2))

    def with_composition(self, block_len: int | None = None) -> "ShapingSpec":
        n = self.block_len if block_len is None else block_len
        comp = composition_for(self, n)
        return ShapingSpec(self.amplitude_alphabet, self.probabilities, self.lam,
                           self.target_entropy_2d, n, comp, self.kind)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude_alphabet": self.amplitude_alphabet.tolist(),
            "probabilities": self.probabilities.tolist(),
            "lambda": self.lam,
            "target_entropy_2d": self.target_entropy_2d,
            "block_len": self.block_len,
            "composition": list(self.composition) if self.composition is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapingSpec":
        comp = d.get("composition")
        return cls(d["amplitude_alphabet"], d["probabilities"], float(d.get("lambda", 0.0)),
                   float(d.get("target_entropy_2d", float("nan"))),
                   int(d.get("block_len", DEFAULT_BLOCK_LEN)),
                   tuple(comp) if comp is not None else None, d.get("kind", "custom"))


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def _gibbs(alphabet: np.ndarray, lam: float, sign: float) -> np.ndarray:
    if math.isinf(lam):
        p = np.zeros(alphabet.size)
        p[0 if sign < 0 else -1] = 1.0
        return p
    logits = sign * lam * alphabet ** 2
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def _solve(alphabet, target_entropy_2d: float, sign: float, kind: str) -> ShapingSpec:
    a = check_1d(alphabet, dtype=np.float64, name="amplitude_alphabet")
    h_max = 2.0 + 2.0 * math.log2(a.size)
    check_scalar(target_entropy_2d, "target_entropy_2d")
    if not (2.0 <= target_entropy_2d <= h_max):
        raise ParameterError(
            f"target entropy {target_entropy_2d} outside achievable range [2, {h_max}]")
    h_amp = target_entropy_2d / 2.0 - 1.0
    if h_amp >= math.log2(a.size) - ENTROPY_TOL / 4:
        lam = 0.0
    elif h_amp <= 0.0:
        lam = math.inf
    else:
        # entropy decreases monotonically in lam for both signs
        lo, hi = 0.0, 1.0 / float(a.max() ** 2)
        while entropy_bits(_gibbs(a, hi, sign)) > h_amp:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if entropy_bits(_gibbs(a, mid, sign)) > h_amp:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(hi, 1e-300):
                break
        lam = 0.5 * (lo + hi)
    p = _gibbs(a, lam, sign)
    p = p / p.sum()
    return ShapingSpec(a, p, lam, float(target_entropy_2d), kind=kind)


def solve_mb(amplitude_alphabet=(1, 3, 5, 7), target_entropy_2d: float = 5.0) -> ShapingSpec:
    """Maxwell-Boltzmann amplitudes, p(a) ~ exp(-lam a^2), hitting the target entropy."""
    return _solve(amplitude_alphabet, target_entropy_2d, -1.0, "MB")


def solve_ivmb(amplitude_alphabet=(1, 3, 5, 7), target_entropy_2d: float = 5.0) -> ShapingSpec:
    """Inverse MB amplitudes, p(a) ~ exp(+lam a^2): favors the outer rings."""
    return _solve(amplitude_alphabet, target_entropy_2d, +1.0, "IvMB")


def uniform_spec(amplitude_alphabet=(1, 3, 5, 7)) -> ShapingSpec:
    a = np.asarray(amplitude_alphabet, dtype=np.float64)
    return ShapingSpec(a, np.full(a.size, 1.0 / a.size), 0.0,
                       2.0 + 2.0 * math.log2(a.size), kind="uniform")


def composition_for(spec: ShapingSpec, block_len: int) -> tuple[int, ...]:
    """Largest-remainder quantization of ``spec.probabilities`` to ``block_len`` counts."""
    m = spec.amplitude_alphabet.size
    check_scalar(block_len, "block_len", lo=m, integer=True)
    target = spec.probabilities * block_len
    counts = np.floor(target + 1e-12).astype(np.int64)
    short = block_len - int(counts.sum())
    rem = target - counts
    # stable sort on -remainder keeps the smaller amplitude first on ties
    order = np.argsort(-np.round(rem, 12), kind="stable")
    for i in order[:short]:
        counts[i] += 1
    return tuple(int(c) for c in counts)


def multinomial(composition) -> int:
    n = 0
    total = 1
    for c in composition:
        for i in range(1, c + 1):
            n += 1
            total = total * n // i
    return total


def ccdm_input_bits(composition) -> int:
    """Number of info bits one CCDM block of this composition carries."""
    return multinomial(composition).bit_length() - 1


def _bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _int_to_bits(v: int, k: int) -> np.ndarray:
    return np.array([(v >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.int8)


def ccdm_match(info_bits, composition) -> np.ndarray:
    """Map ``k`` bits to an amplitude-index sequence of exactly ``composition``.

    Exact arithmetic coding: the interval assigned to each next symbol is
    proportional to the number of completions it leaves, so the coder is the
    lexicographic unranking of multiset permutations in integer arithmetic.
    """
    comp = [int(c) for c in composition]
    bits = check_bits(info_bits, "info_bits")
    k = ccdm_input_bits(comp)
    if bits.size != k:
        raise ParameterError(f"composition {tuple(comp)} takes exactly {k} bits, got {bits.size}")
    index = _bits_to_int(bits)
    remaining = list(comp)
    n = sum(remaining)
    width = multinomial(remaining)
    out = np.empty(n, dtype=np.int64)
    for pos in range(n):
        left = n - pos
        for sym, cnt in enumerate(remaining):
            if cnt == 0:
                continue
            sub = width * cnt // left
            if index < sub:
                out[pos] = sym
                remaining[sym] -= 1
                width = sub
                break
            index -= sub
    return out


def ccdm_dematch(indices, composition) -> np.ndarray:
    """Inverse of :func:`ccdm_match`; raises DecodeError on composition mismatch."""
    comp = [int(c) for c in composition]
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size != sum(comp):
        raise DecodeError("block length does not match composition")
    counts = np.bincount(idx, minlength=len(comp)) if idx.size else np.zeros(len(comp), int)
    if counts.size != len(comp) or np.any(idx < 0) or tuple(counts.tolist()) != tuple(comp):
        raise DecodeError("received block violates the CCDM composition")
    remaining = list(comp)
    n = idx.size
    width = multinomial(remaining)
    rank = 0
    for pos in range(n):
        left = n - pos
        s = int(idx[pos])
        for sym in range(s):
            if remaining[sym]:
                rank += width * remaining[sym] // left
        width = width * remaining[s] // left
        remaining[s] -= 1
    k = ccdm_input_bits(comp)
    if rank >> k:
        raise DecodeError("block lies outside the matcher's codebook")
    return _int_to_bits(rank, k)


# ---------------------------------------------------------------------------
# PAS framing

# Amplitude labels are the reflected Gray code of the amplitude index; the
# sign bit (1 = positive) is prepended, which keeps the full PAM Gray-labeled.


def amplitude_labels(n_amp: int) -> np.ndarray:
    nb = int(math.log2(n_amp))
    if 1 << nb != n_amp:
        raise ParameterError("amplitude alphabet size must be a power of two")
    g = np.arange(n_amp) ^ (np.arange(n_amp) >> 1)
    return ((g[:, None] >> np.arange(nb - 1, -1, -1)) & 1).astype(np.int8)


def level_index(sign_bits, amp_idx, n_amp: int) -> np.ndarray:
    """PAM level index (ascending level) from sign bit and amplitude index."""
    sign_bits = np.asarray(sign_bits)
    amp_idx = np.asarray(amp_idx)
    return np.where(sign_bits == 1, n_amp + amp_idx, n_amp - 1 - amp_idx)


def split_level_index(level_idx, n_amp: int) -> tuple[np.ndarray, np.ndarray]:
    level_idx = np.asarray(level_idx)
    sign = (level_idx >= n_amp).astype(np.int8)
    amp = np.where(sign == 1, level_idx - n_amp, n_amp - 1 - level_idx)
    return sign, amp


@dataclass(frozen=True)
class PasLayout:
    """Bit bookkeeping of one PAS frame.

    ``n_symbols`` 2-D symbols carry ``2*n_symbols`` amplitudes split into
    CCDM blocks. The systematic FEC input is the amplitude labels followed
    by ``n_residual`` extra info bits; parity, tail bits and the residual
    info bits together fill the ``2*n_symbols`` sign positions.
    """

    n_symbols: int
    composition: tuple[int, ...]
    n_blocks: int
    ccdm_bits_per_block: int
    amp_bits_per_dim: int
    n_residual: int
    n_parity: int

    @property
    def n_ccdm_bits(self) -> int:
        return self.n_blocks * self.ccdm_bits_per_block

    @property
    def n_info(self) -> int:
        return self.n_ccdm_bits + self.n_residual

    @property
    def n_systematic(self) -> int:
        return 2 * self.n_symbols * self.amp_bits_per_dim + self.n_residual

    @property
    def info_bits_per_symbol(self) -> float:
        return self.n_info / self.n_symbols


def pas_layout(spec: ShapingSpec, fec, n_symbols: int) -> PasLayout:
    """Solve the residual-bit count so parity + residual bits exactly fill the signs."""
    if spec.composition is None:
        raise ConfigurationError("ShapingSpec needs a composition; call with_composition()")
    n_amp = spec.amplitude_alphabet.size
    m = int(math.log2(n_amp))
    if (2 * n_symbols) % spec.block_len:
        raise ConfigurationError(
            f"2*n_symbols={2 * n_symbols} is not a multiple of block_len={spec.block_len}")
    n_signs = 2 * n_symbols
    n_amp_bits = n_signs * m
    # parity count grows with the residual count; scan for the exact fit
    for r in range(0, n_signs + 1):
        p = fec.n_parity_for(n_amp_bits + r)
        if p + r == n_signs:
            return PasLayout(n_symbols, spec.composition, n_signs // spec.block_len,
                             ccdm_input_bits(spec.composition), m, r, p)
        if p + r > n_signs:
            break
    raise ConfigurationError(
        "FEC parity does not fit the available sign positions for this frame size")


def pas_encode(info_bits, spec: ShapingSpec, fec, n_symbols: int | None = None) -> np.ndarray:
    """Encode info bits into 2-D symbol indices of the PCS-QAM constellation.

    Symbol index = ``i_level * L + q_level`` with ``L = 2 * len(alphabet)``
    levels per dimension in ascending order.
    """
    from .turbo.fec import encode_systematic

    bits = check_bits(info_bits, "info_bits")
    if n_symbols is None:
        n_symbols = pas_symbols_for(spec, fec)
    lay = pas_layout(spec, fec, n_symbols)
    if bits.size != lay.n_info:
        raise ParameterError(f"PAS frame takes {lay.n_info} info bits, got {bits.size}")
    n_amp = spec.amplitude_alphabet.size
    k = lay.ccdm_bits_per_block
    amps = np.concatenate([ccdm_match(bits[b * k:(b + 1) * k], spec.composition)
                           for b in range(lay.n_blocks)]) if lay.n_blocks else np.zeros(0, int)
    residual = bits[lay.n_ccdm_bits:]
    labels = amplitude_labels(n_amp)[amps].reshape(-1)
    systematic = np.concatenate([labels, residual]).astype(np.int8)
    parity = encode_systematic(systematic, fec)
    signs = np.concatenate([parity, residual]).astype(np.int8)
    lev = level_index(signs, amps, n_amp)
    return lev[0::2] * (2 * n_amp) + lev[1::2]


def pas_symbols_for(spec: ShapingSpec, fec) -> int:
    """Smallest frame (in 2-D symbols) whose systematic length matches ``fec``."""
    for n in range(spec.block_len // 2, 1 << 22, spec.block_len // 2):
        try:
            lay = pas_layout(spec, fec, n)
        except ConfigurationError:
            continue
        if lay.n_systematic == fec.n_info:
            return n
        if lay.n_systematic > fec.n_info:
            break
    raise ConfigurationError("no PAS frame size matches the FEC block length")


def pas_bit_llrs_from_symbols(symbol_idx, spec: ShapingSpec, confidence: float = 20.0) -> np.ndarray:
    """Hard symbols to saturated per-bit LLRs (sign, amp bits for I then Q)."""
    n_amp = spec.amplitude_alphabet.size
    L = 2 * n_amp
    idx = np.asarray(symbol_idx, dtype=np.int64)
    lev = np.stack([idx // L, idx % L], axis=1).reshape(-1)
    sign, amp = split_level_index(lev, n_amp)
    bits = np.concatenate([sign[:, None], amplitude_labels(n_amp)[amp]], axis=1)
    return (confidence * (1 - 2 * bits.astype(np.float64))).reshape(-1)


def pas_decode_blocks(bit_llrs, spec: ShapingSpec, fec, n_symbols: int):
    """Decode per-bit LLRs of a PAS frame.

    ``bit_llrs`` holds ``1 + log2(n_amp)`` LLRs per dimension (sign first),
    I before Q, LLR = ln P(0)/P(1). Returns ``(info_bits, failed_blocks)``
    where blocks failing the composition check are filled with zeros.
    """
    from .turbo.fec import decode_systematic

    lay = pas_layout(spec, fec, n_symbols)
    n_amp = spec.amplitude_alphabet.size
    m = lay.amp_bits_per_dim
    llr = check_1d(bit_llrs, dtype=np.float64, name="bit_llrs")
    if llr.size != 2 * n_symbols * (m + 1):
        raise ParameterError("bit LLR count does not match the PAS frame")
    llr = llr.reshape(-1, m + 1)
    sign_llr = llr[:, 0]
    amp_llr = llr[:, 1:].reshape(-1)
    res_llr = sign_llr[lay.n_parity:]
    sys_llr = np.concatenate([amp_llr, res_llr])
    sys_hat = decode_systematic(sys_llr, sign_llr[:lay.n_parity], fec)
    amp_bits = sys_hat[:amp_llr.size].reshape(-1, m)
    weights = 1 << np.arange(m - 1, -1, -1)
    gray = amp_bits @ weights
    amps = _gray_to_index(gray)
    residual = sys_hat[amp_llr.size:]
    out = []
    failed = np.zeros(lay.n_blocks, dtype=bool)
    for b in range(lay.n_blocks):
        blk = amps[b * spec.block_len:(b + 1) * spec.block_len]
        try:
            out.append(ccdm_dematch(blk, spec.composition))
        except DecodeError:
            failed[b] = True
            out.append(np.zeros(lay.ccdm_bits_per_block, dtype=np.int8))
    out.append(residual.astype(np.int8))
    return np.concatenate(out), failed


def pas_decode(llrs_or_symbols, spec: ShapingSpec, fec, n_symbols: int | None = None,
               hard: bool | None = None) -> np.ndarray:
    """Recover info bits from bit LLRs (float) or hard symbol indices (int)."""
    if n_symbols is None:
        n_symbols = pas_symbols_for(spec, fec)
    data = np.asarray(llrs_or_symbols)
    if hard is None:
        hard = np.issubdtype(data.dtype, np.integer)
    llrs = pas_bit_llrs_from_symbols(data, spec) if hard else data
    bits, failed = pas_decode_blocks(llrs, spec, fec, n_symbols)
    if failed.any():
        raise DecodeError(f"{int(failed.sum())} CCDM block(s) violate the composition")
    return bits


def _gray_to_index(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.int64)
    out = g.copy()
    shift = g >> 1
    while np.any(shift):
        out ^= shift
        shift >>= 1
    return out
