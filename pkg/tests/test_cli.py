import subprocess
import sys

import numpy as np
import pytest

from caraprune.cli import main
from caraprune.io_stream import read_rule_csv, write_binary, write_csv


def run(*argv):
    return main([str(a) for a in argv])


def test_prune_gen_verify_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("prune", "--input", "gen:disk:3000", "--basis", "legendre:TD:6", "--seed", 5, "--verify", "--output", a) == 0
    out = capsys.readouterr().out
    resid = float(out.split("verify_residual=")[1].split()[0])
    assert resid <= 1e-10
    assert run("prune", "--input", "gen:disk:3000", "--basis", "legendre:TD:6", "--seed", 5, "--output", b) == 0
    assert a.read_bytes() == b.read_bytes()
    x, w, idx = read_rule_csv(a)
    assert len(w) == 28 and np.all(w > 0) and np.all(np.diff(idx) > 0)


@pytest.mark.parametrize("method", ["scsp", "csp", "nnls", "lp"])
def test_prune_other_methods(tmp_path, method):
    src = tmp_path / "in.csv"
    rng = np.random.default_rng(0)
    write_csv(src, rng.uniform(-1, 1, (300, 2)), np.full(300, 1 / 300))
    out = tmp_path / f"{method}.csv"
    assert run("prune", "--input", src, "--basis", "chebyshev:TD:4", "--method", method, "--verify", "--output", out) == 0
    assert len(read_rule_csv(out)[1]) <= 15


def test_prune_binary_and_sigselect(tmp_path):
    src = tmp_path / "in.bin"
    rng = np.random.default_rng(1)
    write_binary(src, rng.uniform(-1, 1, (500, 2)), rng.uniform(0.5, 1, 500))
    for pol in ("plus", "minus"):
        assert run("prune", "--input", src, "--basis", "legendre:HC:5", "--sigselect", pol, "--k", 2,
                   "--verify", "--output", tmp_path / f"{pol}.csv") == 0


def test_exit_codes(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert run("prune", "--input", tmp_path / "none.csv", "--basis", "legendre:TD:3", "--output", out) == 2
    assert run("prune", "--input", "gen:disk:100", "--basis", "legendre:ZZ:3", "--output", out) == 2
    assert run("prune", "--input", "gen:disk:5", "--basis", "legendre:TD:3", "--output", out) == 2
    assert run("prune", "--input", "gen:disk:200", "--basis", "legendre:TD:3", "--verify", "--verify-tol", "1e-300",
               "--output", out) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,w\n0.1,1\n0.2,-1\n")
    assert run("prune", "--input", bad, "--basis", "legendre:TD:1", "--output", out) == 2
    assert "line 3" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        run("prune", "--input", "gen:disk:10")
    assert e.value.code == 2


def test_perturb_and_compare(tmp_path, capsys):
    base, pert = tmp_path / "base.csv", tmp_path / "pert.csv"
    assert run("perturb", "--input", "gen:disk:400", "--mode", "weights", "--tv", 1e-6, "--seed", 1, "--output", base) == 0
    assert run("perturb", "--input", base, "--mode", "append", "--tv", 1e-3, "--shape", "disk", "--count", 10,
               "--output", pert) == 0
    assert len(read_rule_csv(pert)[1]) == 410
    capsys.readouterr()
    assert run("compare", "--a", base, "--b", pert) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1e-3, rel=1e-2)
    assert run("perturb", "--input", base, "--mode", "append", "--tv", 1e-3, "--output", pert) == 2


def test_compare_pruned_rules_by_index(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("prune", "--input", "gen:square:500", "--basis", "legendre:TD:3", "--output", a)
    run("prune", "--input", "gen:square:500", "--basis", "legendre:TD:3", "--method", "nnls", "--output", b)
    capsys.readouterr()
    assert run("compare", "--a", a, "--b", a) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert run("compare", "--a", a, "--b", b) == 0
    assert 0.0 < float(capsys.readouterr().out) <= 1.0


def test_bench_and_stability(tmp_path):
    rep = tmp_path / "bench.csv"
    assert run("bench", "--method", "gscsp,lp", "--n-grid", "4", "--m-grid", "200,400", "--reps", 1, "--output", rep) == 0
    lines = rep.read_text().splitlines()
    assert lines[0].startswith("method,M,N,rep,seed,wall_time") and len(lines) == 5
    assert run("bench", "--reps", 0, "--output", rep) == 0
    assert run("bench", "--method", "magic", "--output", rep) == 2
    st = tmp_path / "stab.csv"
    assert run("stability", "--M", 300, "--basis", "legendre:TD:3", "--deltas", "1e-9", "--reps", 2,
               "--methods", "gscsp,nnls", "--output", st) == 0
    assert len(st.read_text().splitlines()) == 5


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "caraprune", "prune", "--input", "gen:annulus:500", "--basis", "legendre:TD:2",
         "--verify", "--output", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "verify_residual=" in proc.stdout
