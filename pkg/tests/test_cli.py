import json
import subprocess
import sys

import numpy as np

from selfcal.cli import main, parse_complex, parse_snr_grid
from selfcal.rfmodel import ChannelModel, dumps, generate_gains, synthesize_measurements
from selfcal.topology import build_daisy_chain


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_helpers():
    assert parse_snr_grid("10:40:10") == [10.0, 20.0, 30.0, 40.0]
    assert parse_snr_grid("5,7.5") == [5.0, 7.5]
    assert parse_complex("0.8,0.2") == 0.8 + 0.2j
    assert parse_complex("1-2j") == 1 - 2j
    assert parse_complex([1, 2]) == 1 + 2j


def test_crlb_csv(capsys):
    code, out, _ = run(capsys, "crlb", "--strategy", "daisy", "--M", "5", "--f", "3", "--snr", "20")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "antenna,d_m,crlb_alpha,crlb_beta,crlb_relative"
    assert lines[1].startswith("1,1,0.02")
    assert len(lines) == 5


def test_crlb_json_reports_discrepancy(capsys):
    code, out, _ = run(capsys, "crlb", "--strategy", "combined:1", "--M", "6", "--f", "3", "--format", "json")
    data = json.loads(out)
    assert code == 0
    assert data["max_relative_discrepancy"] < 1e-8


def test_crlb_writes_sidecars(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(capsys, "crlb", "--M", "4", "-o", str(out))
    assert code == 0
    assert out.exists()
    assert (tmp_path / "c.csv.numerical.csv").exists()
    cfg = json.loads((tmp_path / "c.csv.config.json").read_text())
    assert cfg["M"] == 4 and cfg["f"] == 3


def test_verify_optimality(capsys):
    code, out, _ = run(capsys, "verify-optimality", "--M", "5", "--f", "2")
    data = json.loads(out)
    assert code == 0
    assert data["tree_count"] == 125
    assert data["argmin_is_star"] and data["unique_minimizer"]


def test_verify_optimality_cap(capsys):
    code, _, err = run(capsys, "verify-optimality", "--M", "9", "--cap", "8")
    assert code == 2
    assert "error" in err


def test_sweep_and_config_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"M": 6, "f": 3, "strategies": "star,daisy", "snr": "20", "trials": 300}))
    code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--trials", "200")
    assert code == 0
    rows = out.splitlines()
    assert len(rows) == 3
    assert rows[1].split(",")[-2] == "200"


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "sweep", "--config", str(cfg))
    assert code == 2
    assert "bogus" in err


def test_bad_strategy_exit_code(capsys):
    code, _, err = run(capsys, "crlb", "--strategy", "ring", "--M", "4")
    assert code == 2
    assert err


def test_dl_small(capsys):
    code, out, _ = run(capsys, "dl", "--M", "8", "--K", "2", "--draws", "50", "--snr", "20", "--strategies", "star")
    assert code == 0
    names = {line.split(",")[0] for line in out.splitlines()[1:]}
    assert names == {"perfect", "star", "uncalibrated"}


def _measurement_file(tmp_path, with_known=True):
    g = generate_gains(5, 2, seed=4)
    meas = synthesize_measurements(g, build_daisy_chain(5, 2), ChannelModel(1.0, 0.0, 0.0))
    data = json.loads(dumps(meas))
    if with_known:
        a, b = g.known
        data["known"] = {"alpha_f": [a.real, a.imag], "beta_f": [b.real, b.imag]}
    path = tmp_path / "meas.json"
    path.write_text(json.dumps(data))
    return g, path


def test_estimate_full_and_relative(tmp_path, capsys):
    g, path = _measurement_file(tmp_path)
    code, out, _ = run(capsys, "estimate", "--measurements", str(path))
    assert code == 0
    data = json.loads(out)
    alpha = np.array([complex(*data["alpha"][str(m)]) for m in range(1, 6)])
    np.testing.assert_allclose(alpha, g.alpha, atol=1e-12)
    code, out, _ = run(capsys, "estimate", "--measurements", str(path), "--mode", "relative", "--format", "csv")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    c = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    np.testing.assert_allclose(c, g.c, atol=1e-12)


def test_estimate_missing_reference(tmp_path, capsys):
    _, path = _measurement_file(tmp_path, with_known=False)
    code, _, err = run(capsys, "estimate", "--measurements", str(path))
    assert code == 2
    assert "reference" in err


def test_estimate_strategy_mismatch(tmp_path, capsys):
    _, path = _measurement_file(tmp_path)
    code, _, _ = run(capsys, "estimate", "--measurements", str(path), "--strategy", "star")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "selfcal", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "selfcal" in proc.stdout
