import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from alphafair import load_instance
from alphafair.cli import ExperimentSpec, main

from conftest import E1_LINKS, E1_OPT, E1_REQUESTS


@pytest.fixture
def e1_file(tmp_path):
    doc = {"links": [{"id": i, "capacity": c} for i, c in E1_LINKS],
           "requests": [{"id": i, "weight": w, "route": list(rt)} for i, rt, w in E1_REQUESTS]}
    path = tmp_path / "e1.json"
    path.write_text(json.dumps(doc))
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    flags = ["--nodes", 100, "--attach", 4, "--requests", 1000, "--delta-c", 0.01, "--seed", 7]
    code, out, _ = run(["generate", *flags, a], capsys)
    assert code == 0 and "requests=1000" in out
    run(["generate", *flags, b], capsys)
    assert a.read_bytes() == b.read_bytes()
    inst = load_instance(a)
    assert inst.n_requests == 1000 and inst.capacities.min() >= 0.01


def test_generate_rejects_zero_delta(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--delta-c", "0", str(tmp_path / "x.json")])
    assert exc.value.code == 2
    assert "delta-c" in capsys.readouterr().err


def test_solve_e1_verify(e1_file, capsys):
    code, out, _ = run(["solve", e1_file, "--alpha", 1, "--tol", 1e-6, "--verify"], capsys)
    assert code == 0
    assert "# converged=true" in out and "# kkt satisfied=true" in out
    rows = list(csv.DictReader(line for line in out.splitlines() if not line.startswith("#")))
    assert [r["request"] for r in rows] == ["r1", "r2", "r3"]
    assert np.allclose([float(r["allocation"]) for r in rows], E1_OPT, rtol=1e-4)


def test_solve_output_file(e1_file, tmp_path, capsys):
    out_path = tmp_path / "alloc.csv"
    code, _, _ = run(["solve", e1_file, "-o", out_path], capsys)
    assert code == 0 and out_path.read_text().startswith("request,allocation\n")


def test_solve_alpha_usage_error(e1_file, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(e1_file), "--alpha", "0"])
    assert exc.value.code == 2


def test_solve_missing_file(tmp_path, capsys):
    code, _, err = run(["solve", tmp_path / "none.json"], capsys)
    assert code == 1 and "error" in err


def _iterations(out):
    head = out.splitlines()[0]
    return int(head.split("iterations=")[1].split()[0]), "converged=true" in head


def test_fixed_large_lambda_slower(e1_file, capsys):
    _, lb, _ = run(["solve", e1_file], capsys)
    _, fixed, _ = run(["solve", e1_file, "--lambda0", "fixed:1e6"], capsys)
    it_lb, ok_lb = _iterations(lb)
    it_fixed, ok_fixed = _iterations(fixed)
    assert ok_lb and ok_fixed and it_fixed >= it_lb


def test_bound_sweep_csv(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    code, _, _ = run(["bound-sweep", "--requests", 40, "--nodes", 15, "--attach", 2,
                      "--alpha", "0.5,1", "--delta-c", "0.1,1", "--instances", 3,
                      "-o", path], capsys)
    assert code == 0
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode())))
    assert list(rows[0]) == ["alpha", "delta_w", "delta_c", "instance", "score",
                             "ratio_min", "ratio_avg", "ratio_max"]
    assert len(rows) == 2 * 2 * 4
    for k in range(0, len(rows), 4):
        cell, mean = rows[k:k + 3], rows[k + 3]
        assert mean["instance"] == "mean"
        for col in ("score", "ratio_min", "ratio_avg", "ratio_max"):
            assert float(mean[col]) == pytest.approx(np.mean([float(r[col]) for r in cell]),
                                                     rel=1e-12)
        for r in cell:
            assert float(r["ratio_min"]) <= float(r["ratio_avg"]) <= float(r["ratio_max"])


BENCH = ["admm-bench", "--requests", "30,60", "--instances", 2, "--variants",
         "lb,mb,fixed:50", "--nodes", 15, "--attach", 2]


def test_admm_bench_csv(tmp_path, capsys):
    path = tmp_path / "bench.csv"
    code, _, _ = run([*BENCH, "-o", path], capsys)
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["variant", "requests", "instance", "iterations", "lambda0",
                             "converged"]
    assert [(r["variant"], r["requests"], r["instance"]) for r in rows[:4]] == [
        ("lb", "30", "0"), ("lb", "30", "1"), ("lb", "60", "0"), ("lb", "60", "1")]
    assert len(rows) == 12
    assert all(r["converged"] in ("true", "false") for r in rows)
    assert {float(r["lambda0"]) for r in rows if r["variant"] == "fixed:50"} == {50.0}


def test_admm_bench_deterministic_parallel(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    flags = [*BENCH, "--workers", 3, "--partition", "chunks:4"]
    run([*flags, "-o", a], capsys)
    run([*flags, "--jobs", 2, "-o", b], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("boundSweep", ())
    with pytest.raises(ValueError):
        ExperimentSpec("boundSweep", (1.0,), instance_count=0)


def test_module_entry_point(e1_file):
    out = subprocess.run([sys.executable, "-m", "alphafair", "solve", str(e1_file)],
                         capture_output=True, text=True, check=True).stdout
    assert out.startswith("# converged=true")
