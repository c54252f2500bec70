"""One-tap linear-prediction whitener for the equalizer's residual noise."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_1d
from ..exceptions import ParameterError
from ..sigkit import FirFilter

MIN_SYMBOLS = 10_000
ETA_LIMIT = 0.9


def lag1_correlation(r) -> float:
    """Normalized lag-1 autocorrelation Re{R(1)}/R(0)."""
    r = np.asarray(r)
    r0 = np.mean(np.abs(r) ** 2)
    r1 = np.mean(r[1:] * np.conj(r[:-1]))
    return float(np.real(r1) / r0)


def estimate_post_filter(pr_symbols, decided_symbols, min_symbols: int = MIN_SYMBOLS):
    """Return ``(FirFilter([1, eta]), info)`` whitening y - d.

    ``info`` reports lag-1 correlation before and after whitening.
    """
    y = check_1d(pr_symbols, dtype=np.complex128, name="pr_symbols")
    d = check_1d(decided_symbols, dtype=np.complex128, name="decided_symbols")
    if y.size != d.size:
        raise ParameterError("pr_symbols and decided_symbols differ in length")
    if y.size < min_symbols:
        raise ParameterError(f"post-filter estimation needs >= {min_symbols} symbols")
    r = y - d
    rho = lag1_correlation(r)
    eta = float(np.clip(-rho, -ETA_LIMIT, ETA_LIMIT))
    white = r[1:] + eta * r[:-1]
    info = {"eta": eta, "lag1_before": rho, "lag1_after": lag1_correlation(white)}
    return FirFilter(np.array([1.0, eta]), 0), info


def apply_post_filter(y, h_pf: FirFilter, previous=0.0):
    """Causal filtering ``y_k + sum h[m] y_{k-m}``; ``previous`` seeds y_{-1}, ..."""
    y = np.asarray(y, dtype=np.complex128)
    taps = np.asarray(h_pf.taps)
    prev = np.atleast_1d(np.asarray(previous, dtype=np.complex128))
    pad = np.zeros(taps.size - 1, dtype=np.complex128)
    n = min(prev.size, pad.size)
    pad[pad.size - n:] = prev[:n][::-1]
    full = np.convolve(np.concatenate([pad, y]), taps)[pad.size:pad.size + y.size]
    return full


class PostFilterWhitener(BaseEstimator, TransformerMixin):
    """Estimator wrapper: ``fit(pr_symbols, decided)`` then ``transform(pr_symbols)``."""

    def __init__(self, min_symbols=MIN_SYMBOLS):
        self.min_symbols = min_symbols

    def fit(self, X, y):
        self.filter_, self.info_ = estimate_post_filter(X, y, self.min_symbols)
        self.eta_ = self.info_["eta"]
        return self

    def transform(self, X):
        check_is_fitted(self, "filter_")
        return apply_post_filter(X, self.filter_)
