import argparse
import csv
import math
from pathlib import Path

import numpy as np
import pytest

from ftnlink.cli import main, parse_sweep
from ftnlink.harness import ftn_config, pcs_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_parse_sweep():
    assert parse_sweep("0:2:0.5") == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert parse_sweep("1") == [1.0]
    assert parse_sweep("0:1:0.3") == [0.0, 0.3, 0.6, 0.9]
    for bad in ("0:1", "2:1:0.5", "0:1:0", "0:1:-1"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_sweep(bad)


def test_shipped_configs_load():
    from ftnlink.harness import LinkConfig
    expect = {"ftn16qam_turbo.json": ftn_config(), "ftn16qam_oneshot.json":
              ftn_config(receiver="fec_oneshot"), "pcs64qam_mb.json": pcs_config("MB"),
              "pcs64qam_ivmb.json": pcs_config("IVMB")}
    for name, cfg in expect.items():
        assert LinkConfig.load(CONFIGS / name) == cfg


def test_simulate_noise_free(tmp_path, capsys):
    out = tmp_path / "r.csv"
    summary = tmp_path / "s.csv"
    rc = main(["simulate", "--config", str(CONFIGS / "ftn16qam_turbo.json"), "--noise-free",
               "--seeds", "2", "--out", str(out), "--summary", str(summary)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    assert list(rows[0]) == ["format", "margin_db", "seed", "pre_fec_ber", "post_fec_ber", "ser",
                             "evm_percent", "iter_ber_1", "iter_ber_2", "iter_ber_3",
                             "iter_ber_4", "bit_count", "error_count", "elapsed_seconds",
                             "status"]
    assert all(float(r["post_fec_ber"]) == 0 and r["status"] == "ok" for r in rows)
    assert float(rows[0]["margin_db"]) == -math.inf
    assert "post-FEC 0.000e+00" in capsys.readouterr().out
    assert summary.exists()


def test_simulate_sweep(tmp_path):
    cfg = tmp_path / "c.json"
    pcs_config("MB").dump(cfg)
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", str(cfg), "--sweep", "1:2:1", "--seeds", "1",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["margin_db"]) for r in rows] == [1.0, 2.0]


def test_spectrum(tmp_path, capsys):
    out = tmp_path / "psd.csv"
    assert main(["spectrum", "--config", str(CONFIGS / "ftn16qam_turbo.json"),
                 "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (4096, 2)
    assert np.all(np.diff(data[:, 0]) > 0)
    # the pilot tone is the strongest line
    assert data[np.argmax(data[:, 1]), 0] == pytest.approx(ftn_config().pilot_freq, rel=0.01)
    assert "GHz" in capsys.readouterr().out


def test_compare(tmp_path, capsys):
    a, b = tmp_path / "mb.json", tmp_path / "iv.json"
    pcs_config("MB").dump(a)
    pcs_config("IVMB").dump(b)
    rc = main(["compare", "--configs", str(a), str(b), "--ber", "1e-2", "--sweep=-3:9:3",
               "--seeds", "1", "--metric", "pre_fec_ber", "--out", str(tmp_path / "cmp.csv")])
    assert rc == 0
    text = capsys.readouterr().out
    assert "margin at pre_fec_ber = 0.01" in text
    assert "delta vs" in text
    assert (tmp_path / "cmp_1.csv").exists() and (tmp_path / "cmp_2.csv").exists()


def test_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "FTN16QAM", "alpha": 1.0}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["spectrum", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "p.csv")]) == 2
