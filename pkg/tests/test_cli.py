"""CLI contract: schemas, byte-stable reruns, config precedence, exit codes."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from obstacle_walk import cli, mc, ruin
from obstacle_walk import survival as sv
from obstacle_walk.env import load_env, sample_env


def run_cli(*argv):
    return cli.main(list(argv))


def test_env_subcommand_roundtrips(tmp_path):
    out = tmp_path / "e.env"
    assert run_cli("env", "--gamma", "1.5", "--seed", "88700",
                   "--n", "64", "--out", str(out)) == 0
    env = load_env(out)
    ref = sample_env(1.5, 64, 88700)
    assert env.gamma == ref.gamma and env.seed == ref.seed
    assert np.array_equal(env.gaps, ref.gaps)


@pytest.fixture(scope="module")
def env_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("envs") / "e.env"
    run_cli("env", "--gamma", "1.5", "--seed", "88700",
            "--n", "64", "--out", str(out))
    return str(out)


def test_select_json_schema_and_stability(env_file, capsys):
    args = ("select", "--env", env_file, "--n", "100000", "--beta", "1")
    assert run_cli(*args) == 0
    first = capsys.readouterr().out
    assert run_cli(*args) == 0
    assert capsys.readouterr().out == first
    rec = json.loads(first)
    assert set(rec) == {"ell0", "ell0_tilde", "k0", "T1", "T2",
                        "Iloc_lo", "Iloc_hi", "agree"}
    assert rec["Iloc_hi"] - rec["Iloc_lo"] == rec["T1"]
    assert isinstance(rec["agree"], bool)


def test_ruin_csv_matches_library(capsys):
    assert run_cli("ruin", "--n", "6", "--config", "/dev/null") == 2
    capsys.readouterr()
    cfg_free = ("ruin", "--n", "6")
    assert run_cli(*cfg_free) == 2  # no gap width given
    capsys.readouterr()


def test_ruin_csv_values(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"t": 4}')
    assert run_cli("ruin", "--config", str(cfg), "--n", "6") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,n,q0,q1,q"
    for line in lines[1:]:
        t, n, a, b, c = line.split(",")
        n = int(n)
        assert int(t) == 4
        assert float(a) == pytest.approx(ruin.q0(4, n), abs=1e-15)
        assert float(b) == pytest.approx(ruin.q1(4, n), abs=1e-15)
        assert float(c) == pytest.approx(ruin.q(4, n), abs=1e-15)


def test_survive_csv_values(env_file, capsys):
    assert run_cli("survive", "--env", env_file, "--n", "8",
                   "--beta", "0.8", "--mode", "soft") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,logZ"
    curve = sv.survive_log_curve(load_env(env_file), 8, 0.8, mode="soft")
    for line, expect in zip(lines[1:], curve):
        _, logz = line.split(",")
        assert float(logz) == pytest.approx(expect, rel=1e-15, abs=1e-15)
    assert len(lines) == 10


def test_fe_reports_kernel_fields(env_file, capsys):
    assert run_cli("fe", "--env", env_file, "--n", "100000", "--beta", "1") == 0
    rec = json.loads(capsys.readouterr().out)
    assert set(rec) == {"T1", "T2", "phi", "g_T1", "phi_hom_T1",
                        "phi_unitgaps", "h_ratio", "eps_coeff"}
    # better survival on the record gap than on any other arrangement
    assert rec["phi"] < rec["g_T1"]
    assert rec["phi_hom_T1"] < rec["phi"]
    assert rec["eps_coeff"] == pytest.approx(
        1 - 2 * rec["T1"] ** 2 * rec["phi"] / math.pi**2, rel=1e-12
    )


def test_simulate_deterministic(env_file, capsys):
    args = ("simulate", "--env", env_file, "--n", "200", "--beta", "0.4",
            "--reps", "5", "--seed", "11")
    assert run_cli(*args) == 0
    first = capsys.readouterr().out
    assert run_cli(*args) == 0
    assert capsys.readouterr().out == first
    assert first.splitlines()[0] == "replica,survived,steps,final"
    assert len(first.splitlines()) == 6
    assert run_cli("simulate", "--env", env_file, "--n", "200",
                   "--beta", "0.4", "--reps", "5", "--seed", "12") == 0
    assert capsys.readouterr().out != first


def test_localize_byte_identical(tmp_path):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ("localize", "--gamma", "1.5", "--beta", "1", "--n", "2000",
            "--reps", "2", "--seed", "9")
    assert run_cli(*args, "--out", str(f1)) == 0
    assert run_cli(*args, "--out", str(f2)) == 0
    assert f1.read_bytes() == f2.read_bytes()
    assert f1.read_text().splitlines()[0] == ",".join(mc._CSV_COLUMNS)


def test_localize_rejects_soft(capsys):
    assert run_cli("localize", "--gamma", "1.5", "--beta", "1", "--n", "100",
                   "--reps", "1", "--seed", "1", "--mode", "soft") == 2


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"t": 3, "n": 2}')
    assert run_cli("ruin", "--config", str(cfg)) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
    assert run_cli("ruin", "--config", str(cfg), "--n", "5") == 0
    assert len(capsys.readouterr().out.splitlines()) == 6


def test_threads_env_var_default(env_file, tmp_path, monkeypatch):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ("localize", "--gamma", "1.5", "--beta", "1", "--n", "2000",
            "--reps", "3", "--seed", "9")
    monkeypatch.setenv("OBSTACLE_WALK_THREADS", "2")
    assert run_cli(*args, "--out", str(f1)) == 0
    monkeypatch.delenv("OBSTACLE_WALK_THREADS")
    assert run_cli(*args, "--out", str(f2), "--threads", "1") == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run_cli("select", "--n", "10", "--beta", "1") == 2  # no env
    assert run_cli("select", "--env", str(tmp_path / "nope"), "--n", "10",
                   "--beta", "1") == 2
    assert run_cli("verify", "--suite", "nonsense") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("ruin", "--config", str(bad), "--n", "3") == 2
    capsys.readouterr()


def test_unextendable_env_is_infeasible(tmp_path, capsys):
    bad = tmp_path / "bad.env"
    bad.write_text("1.5,7,3\n5\n9\n4\n")
    assert run_cli("select", "--env", str(bad), "--n", "100000",
                   "--beta", "1") == 3
    diag = json.loads(capsys.readouterr().out)
    assert diag["error"] == "infeasible"


def test_verify_suite_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "obstacle_walk.cli", "verify", "--suite", "ruin"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "passed" in proc.stdout
