"""Iterative exchange of extrinsic LLRs between the I/Q sequence detectors
and the FEC decoder."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_1d
from ..exceptions import ParameterError
from ..sigkit import FirFilter
from .detector import TrellisSpec, bcjr_detect
from .fec import FecCodec, fec_bcjr_decode


def effective_filter(h_pr, h_pf) -> FirFilter:
    """h_SD = h_PR * h_PF (plain convolution of the tap sequences)."""
    a = np.asarray(getattr(h_pr, "taps", h_pr))
    b = np.asarray(getattr(h_pf, "taps", h_pf))
    return FirFilter(np.convolve(a, b), 0)


def _split_iq(coded: np.ndarray, nb: int):
    per = coded.reshape(-1, 2 * nb)
    return per[:, :nb].reshape(-1), per[:, nb:].reshape(-1)


def _merge_iq(li: np.ndarray, lq: np.ndarray, nb: int) -> np.ndarray:
    return np.concatenate([li.reshape(-1, nb), lq.reshape(-1, nb)], axis=1).reshape(-1)


def turbo_equalize(i_samples, q_samples, trellis: TrellisSpec, codec: FecCodec, noise_var,
                   n_iter: int = 4, reference_bits=None, history_i=None, history_q=None,
                   return_details: bool = False):
    """Run ``n_iter`` detector/decoder rounds.

    Coded bits are mapped to symbols in transmitted (interleaved) order,
    the first ``bits_per_symbol`` of each symbol's label on I, the rest on
    Q. ``noise_var`` is per real dimension (scalar or an (I, Q) pair).
    Returns ``(info_bits, ber_trace)``; the trace is empty unless
    ``reference_bits`` is given.
    """
    if n_iter < 1:
        raise ParameterError("n_iter must be >= 1")
    yi = check_1d(i_samples, dtype=np.float64, name="i_samples")
    yq = check_1d(q_samples, dtype=np.float64, name="q_samples")
    nb = trellis.bits_per_symbol
    if yi.size != yq.size or 2 * nb * yi.size != codec.n_coded:
        raise ParameterError(
            f"{yi.size} symbols carry {2 * nb * yi.size} bits; codec needs {codec.n_coded}")
    nv_i, nv_q = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), (2,))
    ref = None if reference_bits is None else np.asarray(reference_bits)
    priors = np.zeros(codec.n_coded)
    trace = []
    first_pass = None
    info_hat = None
    for _ in range(n_iter):
        pi, pq = _split_iq(priors, nb)
        li = bcjr_detect(yi, trellis, pi, nv_i, history_i, exact=codec.exact)
        lq = bcjr_detect(yq, trellis, pq, nv_q, history_q, exact=codec.exact)
        det_ext = _merge_iq(li, lq, nb)
        if first_pass is None:
            first_pass = det_ext
        priors, info_hat = fec_bcjr_decode(det_ext, None, codec)
        if ref is not None:
            trace.append(float(np.mean(info_hat != ref)))
    if return_details:
        return info_hat, trace, {"detector_llrs_first": first_pass, "decoder_extrinsic": priors}
    return info_hat, trace


class TurboEqualizer(BaseEstimator):
    """Estimator front-end for :func:`turbo_equalize`.

    ``fit`` records the trellis/codec pair and the per-dimension noise
    variance; ``predict`` takes complex post-filtered samples.
    """

    def __init__(self, n_iter=4, exact=True):
        self.n_iter = n_iter
        self.exact = exact

    def fit(self, trellis: TrellisSpec, codec: FecCodec, noise_var: float):
        self.trellis_ = trellis
        self.codec_ = codec if codec.exact == self.exact else FecCodec(
            codec.n_info, codec.puncture, codec.seed, self.exact, codec.llr_clamp)
        self.noise_var_ = noise_var
        return self

    def predict(self, X, reference_bits=None, history=None):
        X = np.asarray(X, dtype=np.complex128)
        hi = hq = None
        if history is not None:
            h = np.asarray(history, dtype=np.complex128)
            hi, hq = h.real, h.imag
        bits, trace = turbo_equalize(X.real, X.imag, self.trellis_, self.codec_,
                                     self.noise_var_, self.n_iter, reference_bits, hi, hq)
        self.ber_trace_ = trace
        return bits
