"""Command line entry point: ``ftnlink simulate | compare | spectrum``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys

import numpy as np

from .channel import NOISE_FREE
from .exceptions import FtnLinkError
from .harness import (LinkConfig, aggregate, build_tx, compare_margins, sweep, write_records_csv,
                      write_summary_csv)
from .sigkit import occupied_bandwidth, welch_psd


def parse_sweep(text: str) -> list[float]:
    """``start:stop:step`` in dB, stop inclusive; a single number is one margin."""
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError("sweep must be start:stop:step with step > 0")
    start, stop, step = parts
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _margins(args) -> list[float]:
    return [NOISE_FREE] if args.noise_free else args.sweep


def _seeds(args, cfg: LinkConfig) -> list[int]:
    return list(range(args.seeds)) if args.seeds is not None else list(cfg.seeds)


def _progress(verbose: bool):
    if not verbose:
        return None

    def report(rec):
        state = "FAILED " + rec.reason if rec.failed else f"post BER {rec.post_fec_ber:.3g}"
        print(f"  {rec.format} margin {rec.power_margin_db:g} seed {rec.seed}: {state}",
              file=sys.stderr)
    return report


def cmd_simulate(args) -> int:
    cfg = LinkConfig.load(args.config)
    recs = sweep(cfg, _margins(args), _seeds(args, cfg), _progress(args.verbose), args.jobs)
    write_records_csv(recs, args.out)
    rows = aggregate(recs)
    if args.summary:
        write_summary_csv(rows, args.summary)
    for r in rows:
        print(f"{r['format']}  margin {r['margin_db']:g} dB  pre-FEC {r['pre_fec_ber']:.3e}  "
              f"post-FEC {r['post_fec_ber']:.3e}  errors {r['error_count']}/{r['bit_count']}"
              f"  failed {r['n_failed']}")
    return 1 if args.noise_free and any(r["error_count"] or r["n_failed"] for r in rows) else 0


def cmd_compare(args) -> int:
    configs = [LinkConfig.load(p) for p in args.configs]
    seeds = list(range(args.seeds)) if args.seeds is not None else None
    results = compare_margins(configs, _margins(args), args.ber, seeds, args.metric, args.jobs,
                              _progress(args.verbose))
    ref = results[0][1]
    print(f"margin at {args.metric} = {args.ber:g}")
    for k, (path, (cfg, m, recs)) in enumerate(zip(args.configs, results)):
        if args.out:
            write_records_csv(recs, _suffixed(args.out, k + 1))
        label = cfg.format + "/" + cfg.receiver
        if cfg.receiver == "turbo":
            label += f"({cfg.n_iter})"
        if m is None:
            print(f"  {path}  {label}: not measurable in the swept range")
            continue
        delta = ""
        if k and ref is not None:
            delta = f"  delta vs {args.configs[0]}: {m - ref:+.2f} dB"
        print(f"  {path}  {label}: {m:.2f} dB{delta}")
    return 0


def _suffixed(path: str, k: int) -> str:
    stem, dot, ext = path.rpartition(".")
    return f"{stem}_{k}.{ext}" if dot else f"{path}_{k}"


def cmd_spectrum(args) -> int:
    cfg = LinkConfig.load(args.config)
    tx = build_tx(cfg, args.seed)
    f, p = welch_psd(tx.waveform)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "psd_db"])
        for fi, pi in zip(f, 10 * np.log10(np.maximum(p, 1e-30))):
            w.writerow([repr(float(fi)), repr(float(pi))])
    bare = build_tx(cfg.replace(pilot_tone_power_ratio=-math.inf), args.seed).waveform
    print(f"{cfg.format}: 99% occupied bandwidth {occupied_bandwidth(bare, 0.99) / 1e9:.3f} GHz"
          " (pilot tone excluded)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ftnlink", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="per-trial progress on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--sweep", type=parse_sweep, default=parse_sweep("0:4:0.5"),
                       help="power margins in dB as start:stop:step (default 0:4:0.5)")
        p.add_argument("--seeds", type=int, default=None, help="seeds 0..N-1 (default: config)")
        p.add_argument("--noise-free", action="store_true",
                       help="pipeline self-test with all noise disabled")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    s = sub.add_parser("simulate", help="margin sweep for one config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="per-trial CSV")
    s.add_argument("--summary", default=None, help="optional per-margin summary CSV")
    common(s)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="margin at a BER threshold for several configs")
    c.add_argument("--configs", nargs="+", required=True)
    c.add_argument("--ber", type=float, default=1e-3)
    c.add_argument("--metric", choices=("post_fec_ber", "pre_fec_ber"), default="post_fec_ber")
    c.add_argument("--out", default=None, help="per-trial CSV stem (one file per config)")
    common(c)
    c.set_defaults(func=cmd_compare)

    sp = sub.add_parser("spectrum", help="Welch PSD of the transmitted waveform")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_spectrum)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FtnLinkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
