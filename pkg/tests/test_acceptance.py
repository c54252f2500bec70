"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and
then asserts, so a failing criterion also fails the run.
"""

import math
import time

import numpy as np
import pytest

from ftnlink.channel import NOISE_FREE, ChannelConfig, apply_cd
from ftnlink.harness import (aggregate, build_tx, compare_margins, ftn_config, margin_at_ber,
                             pcs_config, run_trial, sweep, transmit)
from ftnlink.ptprdfe import PrTarget, pr_expand
from ftnlink.rxfront import compensate_cd, estimate_fo_pilot
from ftnlink.shaping import (ccdm_dematch, ccdm_input_bits, ccdm_match, solve_ivmb, solve_mb,
                             uniform_spec)
from ftnlink.sigkit import ComplexFrame, occupied_bandwidth
from ftnlink.turbo import bcjr_detect, build_trellis, map_demap_pam
from ftnlink.txchain import qam_constellation

SEEDS = list(range(20))
TURBO_MARGINS = [0.0, 1.0, 2.0, 3.0, 4.0]
# the SNR reference is calibrated so the lowest swept margin sits near BER 1e-2
TURBO_CHECK_MARGIN = 0.0
FTN_COMPARE_MARGINS = [round(0.5 * k, 1) for k in range(11)]
PCS_MARGINS = [0.0, 1.0, 2.0, 3.0, 4.0]


def _elapsed(t0):
    return f"[{time.perf_counter() - t0:.1f} s]"


def test_criterion_1_pr_constellation(acceptance):
    t0 = time.perf_counter()
    q = qam_constellation(16)
    c = pr_expand(q, PrTarget(np.array([1.0, 1.0])))
    levels = np.round(c.levels / q.scale, 9)
    weights = c.level_probabilities * 16
    ok = (c.size == 49 and np.unique(np.round(c.points, 12)).size == 49
          and np.array_equal(levels, [-6, -4, -2, 0, 2, 4, 6])
          and np.allclose(weights, [1, 2, 3, 4, 3, 2, 1], rtol=0, atol=1e-12))
    acceptance(1, ok, f"{c.size} points, weights*16 = {np.round(weights, 12).tolist()} "
                      + _elapsed(t0))
    assert ok


def test_criterion_2_bandwidth_equivalence(acceptance):
    t0 = time.perf_counter()
    ftn = build_tx(ftn_config(pilot_tone_power_ratio=-math.inf), 0).waveform
    pcs = build_tx(pcs_config("MB", pilot_tone_power_ratio=-math.inf), 0).waveform
    b_ftn = occupied_bandwidth(ftn, 0.99)
    b_pcs = occupied_bandwidth(pcs, 0.99)
    rel = abs(b_ftn / b_pcs - 1)
    ok = rel <= 0.03
    acceptance(2, ok, f"FTN {b_ftn / 1e9:.3f} GHz vs PCS {b_pcs / 1e9:.3f} GHz, "
                      f"diff {100 * rel:.2f}% (<= 3%) " + _elapsed(t0))
    assert ok


def test_criterion_3_shaping_solver(acceptance):
    t0 = time.perf_counter()
    mb, iv, un = solve_mb(), solve_ivmb(), uniform_spec()
    err = max(abs(mb.entropy_2d - 5.0), abs(iv.entropy_2d - 5.0))
    order = iv.mean_energy_2d > un.mean_energy_2d > mb.mean_energy_2d
    ok = err <= 1e-9 and order
    acceptance(3, ok, f"entropy error {err:.1e} bits; E: IvMB {iv.mean_energy_2d:.3f} > "
                      f"uniform {un.mean_energy_2d:.3f} > MB {mb.mean_energy_2d:.3f} "
                      + _elapsed(t0))
    assert ok


def test_criterion_4_ccdm_roundtrip(acceptance):
    t0 = time.perf_counter()
    comp = solve_mb().with_composition(96).composition
    k = ccdm_input_bits(comp)
    rng = np.random.default_rng(2024)
    bad_roundtrip = bad_comp = 0
    for _ in range(1000):
        bits = rng.integers(0, 2, k).astype(np.int8)
        seq = ccdm_match(bits, comp)
        bad_comp += tuple(np.bincount(seq, minlength=len(comp))) != comp
        bad_roundtrip += not np.array_equal(ccdm_dematch(seq, comp), bits)
    ok = bad_roundtrip == 0 and bad_comp == 0
    acceptance(4, ok, f"1000 blocks of {k} bits -> 96 amplitudes {comp}: "
                      f"{bad_roundtrip} roundtrip / {bad_comp} composition mismatches "
                      + _elapsed(t0))
    assert ok


def test_criterion_5_bcjr_oracle(acceptance):
    t0 = time.perf_counter()
    q = qam_constellation(16)
    rng = np.random.default_rng(5)
    n = 10_000
    nv = 0.05
    y = q.levels[rng.integers(0, 4, n)] + math.sqrt(nv) * rng.standard_normal(n)
    got = bcjr_detect(y, build_trellis(q.levels, [1.0], q.level_labels), None, nv,
                      llr_clamp=1e9)
    ref = map_demap_pam(y, q.levels, q.level_labels, nv)
    err = float(np.max(np.abs(got - ref)))
    ok = err <= 1e-9
    acceptance(5, ok, f"max |LLR difference| {err:.1e} over {n} symbols " + _elapsed(t0))
    assert ok


@pytest.fixture(scope="module")
def turbo6_sweep():
    t0 = time.perf_counter()
    recs = sweep(ftn_config(n_iter=6), TURBO_MARGINS, SEEDS)
    return recs, time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_6_turbo_convergence(acceptance, turbo6_sweep):
    recs, secs = turbo6_sweep
    failed = sum(r.failed for r in recs)
    ok_recs = [r for r in recs if not r.failed]
    rows = {r["margin_db"]: r for r in aggregate(ok_recs)}
    lines = []
    upticks = []
    for m in TURBO_MARGINS:
        at_m = [r for r in ok_recs if r.power_margin_db == m]
        errs = [sum(round(r.per_iteration_ber[i] * r.bit_count) for r in at_m) for i in range(6)]
        if np.any(np.diff(errs) > 0):
            upticks.append(f"{m:g} dB")
        lines.append(f"{m:g} dB pooled errors over iterations 1..6: {errs}")
    check = [rows[TURBO_CHECK_MARGIN][f"iter_ber_{i}"] for i in range(1, 7)]
    monotone = bool(np.all(np.diff(check) <= 0))
    four_le_one = all(rows[m]["iter_ber_4"] <= rows[m]["iter_ber_1"] for m in TURBO_MARGINS)
    zero_at = []
    for m in TURBO_MARGINS:
        at_m = [r for r in ok_recs if r.power_margin_db == m]
        bits = sum(r.bit_count for r in at_m)
        errs = sum(round(r.per_iteration_ber[3] * r.bit_count) for r in at_m)
        if errs == 0 and bits >= 1e5:
            zero_at.append((m, bits))
    ok = monotone and four_le_one and bool(zero_at) and failed == 0
    detail = (f"mean BER over iterations 1..6 at the calibrated {TURBO_CHECK_MARGIN:g} dB point "
              f"non-increasing: {monotone}; margins with any uptick: "
              f"{', '.join(upticks) or 'none'}; turbo(4) <= turbo(1) at every margin: "
              f"{four_le_one}; zero errors with 4 iterations at "
              + (", ".join(f"{m:g} dB ({b} bits)" for m, b in zero_at) or "no margin")
              + f"; failed trials {failed} [{secs:.0f} s]\n    " + "\n    ".join(lines))
    acceptance(6, ok, detail)
    assert ok


def _db(v):
    return "not reached" if v is None else f"{v:.2f} dB"


@pytest.mark.slow
def test_criterion_7_orderings(acceptance):
    t0 = time.perf_counter()
    # (a) MB beats IvMB at every margin, same SNR reference for both
    mb = {r["margin_db"]: r for r in aggregate(sweep(pcs_config("MB"), PCS_MARGINS, SEEDS))}
    iv = {r["margin_db"]: r for r in aggregate(sweep(pcs_config("IVMB"), PCS_MARGINS, SEEDS))}
    a_ok = all(mb[m]["post_fec_ber"] < iv[m]["post_fec_ber"] for m in PCS_MARGINS)
    a_txt = ", ".join(f"{m:g} dB {mb[m]['post_fec_ber']:.1e}/{iv[m]['post_fec_ber']:.1e}"
                      for m in PCS_MARGINS)
    pcs_gap = [margin_at_ber(list(d.values()), 1e-2) for d in (mb, iv)]
    # (b) turbo(4) against one-shot BCJR+FEC, as reported by compare
    res = compare_margins([ftn_config(n_iter=4), ftn_config(receiver="fec_oneshot")],
                          FTN_COMPARE_MARGINS, 1e-3, SEEDS)
    m_turbo, m_one = res[0][1], res[1][1]
    b_ok = m_turbo is not None and m_one is not None and m_turbo <= m_one
    gap = (m_one - m_turbo) if b_ok else float("nan")
    if None not in pcs_gap:
        iv_txt = f"{pcs_gap[1] - pcs_gap[0]:.2f} dB"
    elif pcs_gap[0] is not None:
        # IvMB never reaches the threshold inside the sweep: only a lower bound
        iv_txt = f"> {PCS_MARGINS[-1] - pcs_gap[0]:.2f} dB (IvMB above 1e-2 throughout)"
    else:
        iv_txt = "not bracketed"
    ok = a_ok and b_ok
    acceptance(7, ok,
               f"(a) MB < IvMB post-FEC BER at every margin: {a_ok} [{a_txt}]; "
               f"IvMB penalty at BER 1e-2: {iv_txt} (reference figure 1.2 dB); "
               f"(b) margin at 1e-3: turbo(4) {_db(m_turbo)}, one-shot {_db(m_one)}, "
               f"turbo gain {gap:.2f} dB (reference figure 0.9 dB) " + _elapsed(t0))
    assert ok


@pytest.mark.slow
def test_criterion_8_roundtrips(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    x = ComplexFrame(rng.standard_normal(1 << 16) + 1j * rng.standard_normal(1 << 16), 80e9)
    ch = ChannelConfig(fiber_len_km=40.0)
    cd_rms = float(np.sqrt(np.mean(np.abs(compensate_cd(apply_cd(x, ch), ch).samples
                                          - x.samples) ** 2)))
    cfg = ftn_config(channel=ChannelConfig(snr_db_at_zero_margin=5.0, cfo_hz=500e6))
    errs = []
    for s in range(100):
        tx = build_tx(cfg, s)
        rx = transmit(cfg, tx, 0.0, s)
        errs.append(estimate_fo_pilot(rx, tx.layout, cfg.foe_window_hz, n_fft=1 << 20) - 500e6)
    foe_max = float(np.max(np.abs(errs)))
    nf = {}
    for c in (ftn_config(), pcs_config("MB"), pcs_config("IVMB")):
        rs = [run_trial(c, NOISE_FREE, s) for s in range(3)]
        nf[c.format] = (sum(r.error_count for r in rs), sum(r.failed for r in rs))
    nf_ok = all(e == 0 and f == 0 for e, f in nf.values())
    ok = cd_rms <= 1e-8 and foe_max <= 1e6 and nf_ok
    acceptance(8, ok, f"CD roundtrip RMS {cd_rms:.1e}; FOE max error {foe_max / 1e6:.3f} MHz "
                      f"over 100 seeds at 5 dB; noise-free (errors, failures): {nf} "
                      + _elapsed(t0))
    assert ok


@pytest.mark.slow
def test_criterion_9_whitening(acceptance):
    t0 = time.perf_counter()
    ratios = []
    for s in range(5):
        r = run_trial(ftn_config(), 1.0, s)
        assert not r.failed, r.reason
        ratios.append(abs(r.diagnostics["lag1_before"]) / abs(r.diagnostics["lag1_after"]))
    ok = min(ratios) >= 10
    acceptance(9, ok, "lag-1 reduction per frame at 1 dB margin: "
                      + ", ".join(f"{x:.0f}x" for x in ratios) + " " + _elapsed(t0))
    assert ok
