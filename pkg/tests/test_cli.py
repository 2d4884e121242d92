import csv
import json
import math
import subprocess
import sys

import pytest

from gasketvar.cli import (
    EXIT_CONFIG,
    EXIT_HYPOTHESIS,
    EXIT_NUMERICAL,
    EXIT_OK,
    bundled_configs,
    dumps,
    fmt_json_float,
    main,
    parse_grid,
)


def write_cfg(tmp_path, name="cfg.json", **kw):
    cfg = {"N": 3, "m": 3, "f": "-(t^3 + 1)", "lambda": 1e-4, "rho": 1.0}
    cfg.update(kw)
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_float_formatting():
    assert fmt_json_float(0.1) == "0.10000000000000001"
    assert fmt_json_float(1.0) == "1.0"
    assert fmt_json_float(float("nan")) == "null"
    for x in (math.pi, 1e-300, -2.5e17, 3.0317e-4):
        assert float(fmt_json_float(x)) == x
    obj = {"a": [1, 2.5, None, True], "b": {"c": "x"}, "d": [], "e": [{"f": 1e-3}]}
    assert json.loads(dumps(obj)) == obj


@pytest.mark.parametrize("N,m,counts", [(3, 2, "vertices 15  edges 27  cells 9"), (2, 0, "vertices 2  edges 1  cells 1")])
def test_mesh_counts_and_determinism(tmp_path, capsys, N, m, counts):
    args = ["mesh", "--N", str(N), "--level", str(m), "--matrices"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert counts in capsys.readouterr().out
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    stem = f"N{N}-m{m}"
    for name in (f"mesh-{stem}.json", f"A-{stem}.mtx", f"M-{stem}.mtx"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    data = json.loads((tmp_path / "a" / f"mesh-{stem}.json").read_text())
    assert list(data) == ["N", "m", "vertices", "edges", "cells", "boundary", "measure"]


def test_matrix_market_round_trip(tmp_path):
    import scipy.io

    from gasketvar.energy import assemble
    from gasketvar.gasket import build_level

    main(["mesh", "--N", "3", "--level", "2", "--matrices", "--out", str(tmp_path)])
    A = scipy.io.mmread(tmp_path / "A-N3-m2.mtx")
    ref = assemble(build_level(3, 2)).A
    assert abs(A - ref).max() == 0


def test_verify_passes_and_mutation_fails(tmp_path, capsys):
    assert main(["verify", "--N", "2", "--N", "3", "--level", "3", "--trials", "40", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "sigma" in out and "FAIL" not in out
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["passed"] and len(rep["suites"]) == 8
    code = main(["verify", "--level", "3", "--trials", "40", "--fault-renormalization", "2"])
    out = capsys.readouterr().out
    assert code == EXIT_NUMERICAL
    assert "[PASS] N=3 m=3 morrey-sup" in out
    assert "[FAIL] N=3 m=3 harmonic-extension" in out


def test_verify_zero_trials(capsys):
    assert main(["verify", "--level", "2", "--trials", "0"]) == EXIT_OK
    assert "vacuous" in capsys.readouterr().out


def test_solve_bundled_config(tmp_path, capsys):
    assert "model-n3.json" in bundled_configs()
    out = tmp_path / "run"
    assert main(["solve", "model-n3.json", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "ok" and rep["exit_ok"]
    assert len(rep["solutions"]) == 2
    assert all(s["residual"] < 1e-8 for s in rep["solutions"])
    assert rep["distinctness"] > 1e-3
    with open(out / "solution-1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "x1", "x2", "u"]
    assert len(rows) == 1 + 123
    # byte-identical rerun
    again = tmp_path / "again"
    main(["solve", "model-n3.json", "--out", str(again)])
    for name in ("report.json", "solution-1.csv", "solution-2.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_solve_hypothesis_failures(tmp_path, capsys):
    code = main(["solve", write_cfg(tmp_path, alpha={"values": 1.0}), "--out", str(tmp_path / "a")])
    assert code == EXIT_HYPOTHESIS
    assert "alpha" in capsys.readouterr().err
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["status"] == "hypothesis-failure" and rep["violated"] == "alpha"

    code = main(["solve", write_cfg(tmp_path, f="-t^3"), "--out", str(tmp_path / "b")])
    assert code == EXIT_HYPOTHESIS
    assert "f0" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    assert main(["solve", write_cfg(tmp_path, f="-(t^3 +"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "position" in capsys.readouterr().err
    assert main(["solve", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["lambda-star", str(bad)]) == EXIT_CONFIG
    assert main(["mesh", "--N", "1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_numerical_failure_exit(tmp_path):
    # lambda far too large for rho: the minimizer is pinned to the sphere
    cfg = write_cfg(tmp_path, **{"lambda": 1.0, "rho": 1e-4})
    assert main(["solve", cfg, "--out", str(tmp_path)]) == EXIT_NUMERICAL


def test_level_and_tolerance_flags(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "model-n3.json", "--level", "2", "--tol-residual", "1e-9", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["level"] == 2 and rep["tol_residual"] == 1e-9


def test_lambda_star_outputs(tmp_path, capsys):
    assert main(["lambda-star", "model-n3.json", "--out", str(tmp_path / "a")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lambda_star 0.00518486029" in out
    base = json.loads((tmp_path / "a" / "lambda_star.json").read_text())["lambda_star"]
    assert base == pytest.approx(5.18485e-3, abs=1e-6)

    main(["lambda-star", write_cfg(tmp_path, f={"model": {"a_expr": "2"}}), "--out", str(tmp_path / "b")])
    half = json.loads((tmp_path / "b" / "lambda_star.json").read_text())["lambda_star"]
    assert half == pytest.approx(base / 2, rel=1e-8)

    main(["lambda-star", write_cfg(tmp_path, alpha={"values": 1 / 162}), "--out", str(tmp_path / "c")])
    rep = json.loads((tmp_path / "c" / "lambda_star.json").read_text())
    assert rep["lambda_star"] == pytest.approx(base / 2, rel=1e-8)
    assert rep["kappa"] == pytest.approx(9 * math.sqrt(2), rel=1e-8)

    assert main(["lambda-star", write_cfg(tmp_path, alpha={"values": 1.0}), "--out", str(tmp_path / "d")]) == EXIT_HYPOTHESIS


def test_sweep_serial_and_parallel_agree(tmp_path):
    cfg = write_cfg(tmp_path, m=2)
    assert main(["sweep", cfg, "--lambdas", "5e-5,1e-4", "--out", str(tmp_path / "s")]) == EXIT_OK
    assert main(["sweep", cfg, "--lambdas", "5e-5,1e-4", "--jobs", "2", "--out", str(tmp_path / "p")]) == EXIT_OK
    a = (tmp_path / "s" / "sweep.csv").read_text()
    assert a == (tmp_path / "p" / "sweep.csv").read_text()
    rows = list(csv.DictReader(a.splitlines()))
    assert [r["n_solutions"] for r in rows] == ["2", "2"]
    assert float(rows[0]["lambda"]) == 5e-5


def test_parse_grid():
    assert parse_grid("1,2,3") == [1.0, 2.0, 3.0]
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("log:1e-4:1e-2:3") == pytest.approx([1e-4, 1e-3, 1e-2])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gasketvar", "mesh", "--N", "2", "--level", "1", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "vertices 3" in res.stdout
