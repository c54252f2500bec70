"""Phase-tracking partial-response DFE.

A fractionally spaced LMS feedforward filter drives the FTN signal toward
a short monic partial-response target rather than a delta, while a
decision-directed loop tracks carrier phase on the same error signal.
Decisions are taken on the original alphabet after removing the target's
post-cursors, so the output handed to the sequence detector stays in the
partial-response domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._kernels import ptprdfe_run
from ._validation import check_1d
from .exceptions import ParameterError, TrainingFailedError
from .txchain import Constellation


@dataclass(frozen=True, eq=False)
class PrTarget:
    """Monic real partial-response target, applied per I/Q dimension."""

    taps: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.float64).reshape(-1)
        if t.size < 1 or t[0] != 1.0:
            raise ParameterError("PR target must be monic (taps[0] == 1)")
        object.__setattr__(self, "taps", t)

    def reference(self, symbols) -> np.ndarray:
        """d_k = sum_m taps[m] s_{k-m} (zero before the first symbol)."""
        s = np.asarray(symbols, dtype=np.complex128)
        return np.convolve(s, self.taps)[:s.size]


@dataclass
class EqualizerState:
    ff_taps: np.ndarray
    fb_taps: np.ndarray
    phase: float = 0.0
    mu_ff: float = 1e-3
    mu_fb: float = 1e-3
    mu_phase: float = 2e-2
    sps: int = 2
    training_mse: np.ndarray | None = None

    def __post_init__(self):
        self.ff_taps = np.array(self.ff_taps, dtype=np.complex128)
        self.fb_taps = np.array(self.fb_taps, dtype=np.complex128)
        if self.ff_taps.size % 2 == 0:
            raise ParameterError("feedforward length must be odd")
        if min(self.mu_ff, self.mu_fb, self.mu_phase) < 0:
            raise ParameterError("step sizes must be non-negative")

    @classmethod
    def initial(cls, n_ff: int = 31, n_fb: int = 4, gain: complex = 1.0, **kw) -> "EqualizerState":
        ff = np.zeros(n_ff, dtype=np.complex128)
        ff[n_ff // 2] = gain
        return cls(ff, np.zeros(n_fb, dtype=np.complex128), **kw)

    def copy(self) -> "EqualizerState":
        return replace(self, ff_taps=self.ff_taps.copy(), fb_taps=self.fb_taps.copy())


def pr_expand(constellation: Constellation, target: PrTarget) -> Constellation:
    """Constellation seen at the PR equalizer output, with exact occurrence
    probabilities (per dimension: all level tuples through the target)."""
    h = target.taps
    if h.size == 1:
        return constellation
    lev = constellation.levels
    lp = constellation.level_probabilities
    vals = np.zeros(1)
    probs = np.ones(1)
    for tap in h:
        vals = (vals[:, None] + tap * lev[None, :]).reshape(-1)
        probs = (probs[:, None] * lp[None, :]).reshape(-1)
    key = np.round(vals, 9)
    uniq, inv = np.unique(key, return_inverse=True)
    w = np.bincount(inv, weights=probs)
    keep = w > 0
    uniq, w = uniq[keep], w[keep]
    pts = (uniq[:, None] + 1j * uniq[None, :]).reshape(-1)
    pw = (w[:, None] * w[None, :]).reshape(-1)
    no_labels = np.zeros((pts.size, 0), dtype=np.int8)
    return Constellation(pts, pw, no_labels, uniq, w, np.zeros((uniq.size, 0), np.int8),
                         constellation.scale, f"PR{uniq.size ** 2}-{constellation.name}")


def _history_depth(state: EqualizerState, target: PrTarget) -> int:
    return max(state.fb_taps.size, target.taps.size - 1, 1)


def _reference_power(points, target: PrTarget) -> float:
    return float(np.mean(np.abs(points) ** 2) * np.sum(target.taps ** 2))


def _run(state, x, center0, n_sym, target, points, known, mu_ff, hist=None):
    if hist is None:
        hist = np.zeros(_history_depth(state, target), dtype=np.complex128)
    known = np.ascontiguousarray(known, dtype=np.complex128)
    y, dec, ph, err, phase = ptprdfe_run(
        x, int(center0), int(n_sym), int(state.sps), state.ff_taps, state.fb_taps,
        target.taps, np.ascontiguousarray(points, dtype=np.complex128), known, known.size,
        float(state.phase), float(mu_ff), float(state.mu_fb if mu_ff else 0.0),
        float(state.mu_phase), hist, _reference_power(points, target))
    state.phase = float(phase)
    return y, dec, ph, err


def train(state: EqualizerState, rx_samples, known_symbols, target: PrTarget,
          center0: int = 0, passes: int = 8, divergence_ratio: float = 4.0) -> EqualizerState:
    """Data-aided LMS training over the known preamble (repeated ``passes`` times).

    Returns a new state; raises TrainingFailedError when the error power
    grows over the final third of the last pass.
    """
    x = check_1d(rx_samples, dtype=np.complex128, name="rx_samples")
    s = check_1d(known_symbols, dtype=np.complex128, name="known_symbols")
    out = state.copy()
    if out.mu_ff == 0:
        return out
    history = []
    for _ in range(passes):
        _, _, _, err = _run(out, x, center0, s.size, target, s[:1], s, out.mu_ff)
        history.append(err)
    err = history[-1]
    third = err.size // 3
    # growth only counts as divergence once the error is a sizeable fraction
    # of the target power; tracking lag on a clean preamble is not a failure
    ref = _reference_power(s, target)
    tail = np.mean(err[-third:]) if third else 0.0
    if third and tail > divergence_ratio * np.mean(err[third:2 * third]) and tail > 0.1 * ref:
        raise TrainingFailedError("equalizer error power grows at the end of training")
    if not np.all(np.isfinite(out.ff_taps)):
        raise TrainingFailedError("equalizer taps diverged")
    # per-pass mean error power over the last 20% of the preamble
    tail_len = max(1, s.size // 5)
    out.training_mse = np.array([e[-tail_len:].mean() for e in history])
    return out


def equalize(state: EqualizerState, rx_samples, target: PrTarget, constellation: Constellation,
             center0: int = 0, n_symbols: int | None = None, known_symbols=None,
             mu_ff: float | None = None):
    """Run the PT-PRDFE; returns ``(pr_symbols, decided_symbols, phase_trace)``.

    ``known_symbols`` (optional) are used in place of decisions for the
    first symbols, e.g. the preamble. The state is updated in place.
    """
    x = check_1d(rx_samples, dtype=np.complex128, name="rx_samples")
    if n_symbols is None:
        n_symbols = (x.size - center0 + state.sps - 1) // state.sps
    known = np.zeros(0, np.complex128) if known_symbols is None else np.asarray(known_symbols)
    mu = state.mu_ff if mu_ff is None else mu_ff
    y, dec, ph, _ = _run(state, x, center0, n_symbols, target, constellation.points, known, mu)
    return y, dec, ph


class PTPRDFE(BaseEstimator, TransformerMixin):
    """Estimator interface: ``fit`` trains on the preamble, ``transform``
    equalizes preamble+payload and returns the PR-domain symbols.

    After ``transform``: ``decisions_``, ``phase_trace_``.
    """

    def __init__(self, pr_taps=(1.0, 1.0), n_ff=31, n_fb=4, mu_train=1e-3, mu_track=1e-4,
                 mu_fb=1e-3, mu_phase=2e-2, train_passes=8, sps=2):
        self.pr_taps = pr_taps
        self.n_ff = n_ff
        self.n_fb = n_fb
        self.mu_train = mu_train
        self.mu_track = mu_track
        self.mu_fb = mu_fb
        self.mu_phase = mu_phase
        self.train_passes = train_passes
        self.sps = sps

    def fit(self, X, y, center0=0):
        """X: received samples at ``sps``; y: known preamble symbols."""
        X = check_1d(X, dtype=np.complex128, name="X")
        known = check_1d(y, dtype=np.complex128, name="y")
        self.target_ = PrTarget(np.asarray(self.pr_taps, dtype=np.float64))
        win = X[center0:center0 + self.sps * known.size]
        gain = np.sqrt(np.mean(np.abs(self.target_.reference(known)) ** 2) /
                       max(np.mean(np.abs(win) ** 2), 1e-30))
        state = EqualizerState.initial(self.n_ff, self.n_fb, gain,
                                       mu_ff=self.mu_train, mu_fb=self.mu_fb,
                                       mu_phase=self.mu_phase, sps=self.sps)
        self.state_ = train(state, X, known, self.target_, center0, self.train_passes)
        self.known_ = known
        self.center0_ = center0
        return self

    def transform(self, X, constellation: Constellation, n_symbols=None, known_symbols=None):
        check_is_fitted(self, "state_")
        known = self.known_ if known_symbols is None else known_symbols
        st = self.state_.copy()
        y, dec, ph = equalize(st, X, self.target_, constellation, self.center0_, n_symbols,
                              known, mu_ff=self.mu_track)
        self.decisions_ = dec
        self.phase_trace_ = ph
        self.final_state_ = st
        return y
