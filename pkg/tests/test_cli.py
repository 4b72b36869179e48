import subprocess
import sys

import numpy as np
import pytest

from cpcs.cli import main
from cpcs.io import read_scan_csv, read_table, write_table
from cpcs.units import fs_to_au


def test_convert_units(capsys):
    assert main(["convert-units", "7.2e8V_per_m", "--to", "au"]) == 0
    value = float(capsys.readouterr().out.split()[0])
    assert value == pytest.approx(1.4e-3, rel=0.01)
    assert main(["convert-units", "1au", "--to", "fs", "--kind", "time"]) == 0
    assert capsys.readouterr().out.startswith("0.0241888")
    assert main(["convert-units", "1eV", "--to", "fs"]) == 2
    assert "not valid" in capsys.readouterr().err


def test_unknown_subcommand_and_flag(capsys):
    with pytest.raises(SystemExit) as e:
        main(["plot"])
    assert e.value.code != 0
    with pytest.raises(SystemExit) as e:
        main(["scan", "--config", "fig2", "--bogus"])
    assert e.value.code != 0
    with pytest.raises(SystemExit):
        main(["g2map", "--config", "fig1c", "--delay", "72"])
    assert "cannot parse quantity" in capsys.readouterr().err


def test_unreadable_config(capsys, tmp_path):
    assert main(["g2map", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert "cannot read config" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"kind": "tls"}}')
    assert main(["g2map", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "model.omega" in capsys.readouterr().err


def test_override_for_wrong_model(capsys, tmp_path):
    assert main(["g2map", "--config", "fig1c", "--delta", "1e-3au", "--out", str(tmp_path)]) == 2
    assert "--delta" in capsys.readouterr().err


def test_unwritable_output(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["scan", "--config", "fig2", "--out", str(blocker / "sub")]) == 2
    assert "not writable" in capsys.readouterr().err


def test_g2map(tmp_path, capsys):
    assert main(["g2map", "--config", "fig1c", "--delay", "72fs", "--out", str(tmp_path), "--dt", "1au"]) == 0
    meta, cols = read_table(tmp_path / "p_map.csv")
    assert len(meta["config_hash"]) == 16
    assert (cols["t2_fs"] >= cols["t1_fs"]).all()
    k = np.argmax(cols["value"])
    assert cols["t2_fs"][k] - cols["t1_fs"][k] == pytest.approx(72.0, abs=1.0)
    assert "max p at" in capsys.readouterr().out


def test_scan_then_spectrum(tmp_path):
    out = tmp_path / "run"
    assert main(["scan", "--config", "fig2", "--delta", "0au", "--delay-max", "3fs", "--out", str(out)]) == 0
    meta, d, c, f = read_scan_csv(out / "scan.csv")
    assert len(d) == 13 and np.all(c > 0)
    assert (out / "scan_summary.json").exists()
    assert main(["spectrum", "--in", str(out / "scan.csv"), "--channel", "f"]) == 0
    smeta, cols = read_table(out / "spectrum_f.csv")
    assert smeta["config_hash"] == meta["config_hash"]


def test_spectrum_of_synthetic_cosine(tmp_path):
    w0 = 7.35e-2
    T = fs_to_au(np.arange(0, 220.0, 0.25))
    path = write_table(tmp_path / "scan.csv", ["T_fs", "c_Hz", "f_Hz"], np.column_stack([np.arange(0, 220.0, 0.25), 1e5 + 1e4 * np.cos(w0 * T), np.full(len(T), 1e6)]), {"config_hash": "synthetic"})
    assert main(["spectrum", "--in", str(path), "--channel", "c", "--out", str(tmp_path / "s.csv")]) == 0
    _, cols = read_table(tmp_path / "s.csv")
    k = np.argmax(cols["magnitude"])
    assert abs(cols["omega_au"][k] - w0) <= cols["omega_au"][1]


def test_validate(capsys):
    assert main(["validate", "--config", "fig1c", "--n-traj", "500", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_entry_point_module():
    r = subprocess.run([sys.executable, "-m", "cpcs.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "cpcs" in r.stdout
