import json
import os
import subprocess
import sys

import pytest

from mimobc import __version__
from mimobc.cli import Table, dispatch, emit_csv, format_value


def run(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_offsets_golden(capsys):
    code, out, _ = run(["offsets", "--M", "5", "--K", "5", "--N", "1"], capsys)
    assert code == 0
    line = next(l for l in out.splitlines() if l.strip().startswith("DPC-ZF "))
    assert "beta=9.2573 bps/Hz" in line and "delta=5.5544 dB" in line


def test_offsets_bd(capsys, tmp_path):
    path = tmp_path / "off.csv"
    code, out, _ = run(["offsets", "--M", "12", "--K", "4", "--N", "3", "--out", str(path)], capsys)
    assert code == 0
    line = next(l for l in out.splitlines() if l.strip().startswith("BD-ZF "))
    assert "beta=14.4270" in line and "delta=3.6067" in line
    text = path.read_text()
    assert text.splitlines()[0] == "quantity,M,K,N,beta_bps_hz,delta_db,source"
    assert os.path.exists(str(path) + ".manifest.json")


def test_offsets_weighted(capsys):
    code, out, _ = run(["offsets", "--M", "4", "--K", "2", "--N", "1", "--weights", "0.6", "0.4"], capsys)
    assert code == 0 and "weighted DPC-ZF" in out and "beta=0.2885" in out


@pytest.mark.parametrize("argv", [
    ["offsets", "--M", "2", "--K", "3", "--N", "1"],
    ["offsets", "--M", "five"],
    ["offsets"],
    ["frobnicate"],
    [],
    ["verify", "--only", "42"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1 and err


def test_infeasible_names_constraint(capsys):
    _, _, err = run(["offsets", "--M", "2", "--K", "3", "--N", "1"], capsys)
    assert "M >= K*N" in err


def test_help_names_figures(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == 0
    for fig in ("fig2", "fig3", "fig4", "fig6", "fig7", "fig8"):
        assert fig in out


def test_version(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0 and __version__ in out


def test_curve_csv_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["curve", "--M", "3", "--K", "3", "--N", "1", "--snr-db", "0", "10", "--trials", "5",
            "--seed", "4", "--schemes", "ZF_uniform", "DPC_uniform", "--out"]
    assert dispatch(argv + [str(a)]) == 0
    assert dispatch(argv + [str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "snr_db,scheme,mean_bps_hz,stderr,trials,seed"
    assert [l.split(",")[:2] for l in lines[1:]] == [["0", "DPC_uniform"], ["0", "ZF_uniform"],
                                                    ["10", "DPC_uniform"], ["10", "ZF_uniform"]]
    man = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert man["command"] == "curve" and man["seed"] == 4 and man["version"] == __version__


def test_seed_env(tmp_path, capsys, monkeypatch):
    argv = ["curve", "--M", "2", "--K", "2", "--N", "1", "--snr-db", "10", "--trials", "3",
            "--schemes", "DPC_uniform", "--out"]
    monkeypatch.setenv("MIMOBC_SEED", "77")
    assert dispatch(argv + [str(tmp_path / "env.csv")]) == 0
    monkeypatch.delenv("MIMOBC_SEED")
    assert dispatch(argv + [str(tmp_path / "flag.csv"), "--seed", "77"]) == 0
    assert dispatch(argv + [str(tmp_path / "zero.csv")]) == 0
    capsys.readouterr()
    env, flag, zero = ((tmp_path / n).read_bytes() for n in ("env.csv", "flag.csv", "zero.csv"))
    assert env == flag != zero
    monkeypatch.setenv("MIMOBC_SEED", "abc")
    assert dispatch(argv + [str(tmp_path / "x.csv")]) == 1


def test_unwritable_path(capsys, tmp_path):
    bad = str(tmp_path / "missing" / "dir" / "o.csv")
    code, _, err = run(["offsets", "--M", "4", "--K", "2", "--N", "1", "--out", bad], capsys)
    assert code == 3 and bad in err


def test_power_gap_and_weighted_and_queue(capsys, tmp_path):
    assert dispatch(["curve", "--figure", "fig4", "--power-gap", "--trials", "3",
                     "--snr-db", "10", "20"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("snr_db,scheme,")
    assert dispatch(["weighted", "--figure", "fig8", "--trials", "3", "--snr-db", "10"]) == 0
    assert "WSR_top_M" in capsys.readouterr().out
    trace = tmp_path / "trace.csv"
    assert dispatch(["queue", "--M", "4", "--K", "2", "--loads", "0.3", "--slots", "30",
                     "--capacity-trials", "10", "--trace-out", str(trace)]) == 0
    capsys.readouterr()
    assert trace.read_text().splitlines()[0].startswith("slot,q_1,q_2,R_1,R_2")


def test_emit_csv_format(capsys):
    t = Table(["snr_db", "scheme", "x"], [(10.0, "b", 1 / 3), (0.0, "z", float("nan")), (10.0, "a", 2)])
    text = emit_csv(t, None)
    assert text == "snr_db,scheme,x\n0,z,nan\n10,a,2\n10,b,0.333333333333\n"
    assert format_value(True) == "true" and format_value(1e-20) == "1e-20"
    with pytest.raises(ValueError):
        emit_csv(Table(["a"]), None)


@pytest.mark.slow
def test_verify_quick_subprocess():
    res = subprocess.run([sys.executable, "-m", "mimobc", "verify", "--quick"],
                         capture_output=True, text=True, timeout=600)
    assert res.returncode == 0, res.stdout + res.stderr
    lines = [l for l in res.stdout.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(lines) == 9 and all(l.startswith("PASS") for l in lines)
