import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from blockopt import cli
from blockopt.admm import AdmmProblem
from blockopt.bcd import BcdProblem, QuadraticCoupling
from blockopt.certify import run
from blockopt.errors import ParameterError
from blockopt.problems import BUILTINS, ProblemSpec, builtin, load_problem, problem_from_dict
from blockopt.prox import L1, IndBox, Zero
from blockopt.reference import lasso_multiplier, solve_lasso
from blockopt.smooth import LeastSquares
from blockopt.traceio import read_trace, trace_csv, write_trace


def small_bcd(seed=5):
    rng = np.random.default_rng(seed)
    A, B = rng.uniform(-1, 1, (12, 5)), rng.uniform(-1, 1, (12, 4))
    c = rng.uniform(-1, 1, 12)
    p = BcdProblem(L1(0.1), IndBox(-1.0, 1.0), QuadraticCoupling(A, B, c), 5, 4)
    return ProblemSpec("small-bcd", "bcd", p, config={"gamma": 2.0, "max_iters": 3000, "stop_tol": 1e-10, "seed": 1})


def small_admm(seed=6):
    rng = np.random.default_rng(seed)
    A, c = rng.uniform(-1, 1, (6, 8)), rng.uniform(-1, 1, 6)
    lam = 0.2
    x = solve_lasso(A, c, lam, tol=1e-12)
    I = np.eye(8)
    p = AdmmProblem(Zero(), L1(lam), I, -I, np.zeros(8), smooth1=LeastSquares(A, c), feasible_point=(x, x))
    return ProblemSpec(
        "small-admm", "admm", p, config={"rho": 1.0, "tau": 1.2, "max_iters": 3000, "primal_tol": 1e-9,
                                         "dual_tol": 1e-9},
        reference={"x1": x.tolist(), "x2": x.tolist(), "y": lasso_multiplier(A, c, x).tolist()},
    )


@pytest.fixture
def files(tmp_path):
    b, a = tmp_path / "bcd.json", tmp_path / "admm.json"
    small_bcd().save(b)
    small_admm().save(a)
    return tmp_path, str(b), str(a)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_round_trip_exactly(name):
    spec = builtin(name)
    again = problem_from_dict(json.loads(spec.dumps()))
    assert again.dumps() == spec.dumps()


def test_custom_specs_round_trip():
    for spec in (small_bcd(), small_admm()):
        assert problem_from_dict(json.loads(spec.dumps())).to_dict() == spec.to_dict()


def _mutated(spec, **changes):
    d = spec.to_dict()
    for k, v in changes.items():
        cur = d
        *head, last = k.split("__")
        for h in head:
            cur = cur[h]
        cur[last] = v
    return d


@pytest.mark.parametrize(
    "change,field",
    [
        ({"algorithm": "sgd"}, "algorithm"),
        ({"dims__n": 0}, "dims.n"),
        ({"coupling__A__rows": 3}, "coupling"),
        ({"f__lambda": -1.0}, "f.lambda"),
        ({"config__gamma": 0.5}, "gamma"),
        ({"config__speed": 3}, "config.speed"),
        ({"schema_version": 9}, "schema_version"),
    ],
)
def test_bcd_field_errors_name_the_field(change, field):
    with pytest.raises(ParameterError) as info:
        problem_from_dict(_mutated(small_bcd(), **change))
    assert info.value.field.startswith(field)


@pytest.mark.parametrize(
    "change,field",
    [
        ({"config__tau": 1.7}, "tau"),
        ({"config__rho": 0.0}, "rho"),
        ({"b": [0.0] * 3}, "b"),
        ({"reference__y": [0.0] * 8}, "reference.y"),
        ({"A1__rows": 7}, "A1"),
    ],
)
def test_admm_field_errors_name_the_field(change, field):
    with pytest.raises(ParameterError) as info:
        problem_from_dict(_mutated(small_admm(), **change))
    assert info.value.field.startswith(field)


def test_tau_error_cites_bound():
    with pytest.raises(ParameterError, match=r"tau: must lie in \(0, \(1 \+ sqrt 5\)/2\) = \(0, 1.6180339887\)"):
        problem_from_dict(_mutated(small_admm(), config__tau=1.7))


def test_matrices_from_side_files(tmp_path):
    spec = small_admm()
    d = spec.to_dict()
    np.savetxt(tmp_path / "A1.txt", spec.problem.A1.matrix)
    with open(tmp_path / "b.json", "w") as fh:
        json.dump(d["b"], fh)
    d["A1"], d["b"] = {"file": "A1.txt"}, {"file": "b.json"}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(d))
    loaded = load_problem(str(path))
    assert np.array_equal(loaded.problem.A1.matrix, spec.problem.A1.matrix)


def test_missing_problem_and_bad_json(tmp_path):
    with pytest.raises(ParameterError, match="no such file or built-in"):
        load_problem(str(tmp_path / "nope.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ParameterError, match="invalid JSON"):
        load_problem(str(bad))


def test_trace_csv_round_trip_is_bit_exact(tmp_path):
    for spec in (small_bcd(), small_admm()):
        tr = run(spec, max_iters=40)
        path = tmp_path / f"{spec.name}.csv"
        write_trace(path, spec, tr)
        back = read_trace(path, spec)
        arrays = ("X", "Y", "psi", "dist") if spec.algorithm == "bcd" else ("X1", "X2", "Y", "R", "lagrangian")
        for a in arrays:
            assert np.array_equal(getattr(tr, a), getattr(back, a))
        assert trace_csv(spec, back) == path.read_text()


def test_large_problems_store_norms_unless_full(tmp_path):
    spec = builtin("consensus-lasso")
    tr = run(spec, max_iters=5)
    short = trace_csv(spec, tr)
    assert "x1_norm" in short.splitlines()[0] and "x1_0" not in short.splitlines()[0]
    path = tmp_path / "t.csv"
    path.write_text(short)
    with pytest.raises(ParameterError, match="full dump"):
        read_trace(path, spec)
    write_trace(path, spec, tr, full=True)
    assert np.array_equal(read_trace(path, spec).X1, tr.X1)


# ------------------------------------------------------------------ CLI


def test_run_bcd_certify_passes(files, capsys, tmp_path):
    _, b, _ = files
    rep = tmp_path / "r.json"
    code = cli.main(["run-bcd", "--problem", b, "--gamma", "1.5", "--certify", "--report", str(rep)])
    out = capsys.readouterr().out
    assert code == 0, out
    statuses = {c["name"]: c["status"] for c in json.loads(rep.read_text())["checks"]}
    for name in ("descent", "subdiff", "length", "critical"):
        assert statuses[name] == "pass"
    assert json.loads(rep.read_text())["schema_version"] == 1


def test_run_admm_rejects_tau(files, capsys):
    _, _, a = files
    assert cli.main(["run-admm", "--problem", a, "--tau", "1.7"]) == 2
    assert "(1 + sqrt 5)/2" in capsys.readouterr().err


def test_run_admm_certify_passes(files, capsys):
    _, _, a = files
    assert cli.main(["run-admm", "--problem", a, "--certify"]) == 0, capsys.readouterr()


def test_wrong_algorithm_is_input_error(files, capsys):
    _, b, _ = files
    assert cli.main(["run-admm", "--problem", b]) == 2


def test_quadratic_trace_row_zero_is_initial_point(tmp_path, capsys):
    path = tmp_path / "q.csv"
    assert cli.main(["run-bcd", "--problem", "quadratic", "--max-iters", "10", "--trace", str(path)]) == 0
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cfg = builtin("quadratic").config
    assert [float(rows[0][f"x_{i}"]) for i in range(20)] == cfg["x0"]
    assert [float(rows[0][f"y_{i}"]) for i in range(20)] == cfg["y0"]
    assert len(rows) == 11 and rows[-1]["stop"] == "max_iters"


def test_verify_reproduces_run_report(files, tmp_path, capsys):
    _, b, _ = files
    t, r1, r2 = tmp_path / "t.csv", tmp_path / "r1.json", tmp_path / "r2.json"
    assert cli.main(["run-bcd", "--problem", b, "--certify", "--trace", str(t), "--report", str(r1)]) == 0
    assert cli.main(["verify", "--trace", str(t), "--problem", b, "--report", str(r2)]) == 0
    assert r1.read_bytes() == r2.read_bytes()


def test_verify_flags_corrupted_row(files, tmp_path, capsys):
    _, b, _ = files
    t = tmp_path / "t.csv"
    assert cli.main(["run-bcd", "--problem", b, "--max-iters", "100", "--tol", "0", "--trace", str(t)]) == 0
    lines = t.read_text().splitlines()
    header = lines[0].split(",")
    row = lines[41].split(",")  # record k = 40
    j = header.index("x_0")
    row[j] = repr(float(row[j]) + 0.5)
    lines[41] = ",".join(row)
    t.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert cli.main(["verify", "--trace", str(t), "--problem", b, "--checks", "descent"]) == 1
    out = capsys.readouterr().out
    assert "Sufficient_Descent1" in out and ("k=39" in out or "k=40" in out)


def test_verify_dimension_mismatch(files, tmp_path, capsys):
    _, b, _ = files
    t = tmp_path / "q.csv"
    assert cli.main(["run-bcd", "--problem", "quadratic", "--max-iters", "5", "--trace", str(t)]) == 0
    assert cli.main(["verify", "--trace", str(t), "--problem", b]) == 2
    assert "columns" in capsys.readouterr().err


def test_verify_kl_on_quadratic(tmp_path, capsys):
    t = tmp_path / "q.csv"
    assert cli.main(["run-bcd", "--problem", "quadratic", "--max-iters", "300", "--trace", str(t)]) == 0
    capsys.readouterr()
    code = cli.main(["verify", "--trace", str(t), "--problem", "quadratic", "--checks", "kl",
                     "--theta", "0.5", "--c", "auto"])
    assert code == 0, capsys.readouterr()


def test_unknown_check_is_input_error(files, tmp_path, capsys):
    t = tmp_path / "q.csv"
    cli.main(["run-bcd", "--problem", "quadratic", "--max-iters", "5", "--trace", str(t)])
    assert cli.main(["verify", "--trace", str(t), "--problem", "quadratic", "--checks", "phi"]) == 2


def test_several_problems_in_parallel(files, tmp_path, capsys):
    root, b, _ = files
    t = tmp_path / "out.csv"
    code = cli.main(["run-bcd", "--problem", b, "--problem", "quadratic", "--jobs", "2", "--max-iters", "20",
                     "--trace", str(t)])
    assert code == 0
    assert (tmp_path / "out.small-bcd.csv").exists() and (tmp_path / "out.quadratic.csv").exists()


def test_seed_env_and_flag_precedence(files, tmp_path, capsys, monkeypatch):
    _, b, _ = files

    def trace_text(*extra):
        t = tmp_path / "s.csv"
        assert cli.main(["run-bcd", "--problem", b, "--max-iters", "3", "--trace", str(t), *extra]) == 0
        return t.read_text()

    monkeypatch.setenv(cli.SEED_ENV, "7")
    env7 = trace_text()
    assert trace_text("--seed", "7") == env7
    assert trace_text("--seed", "8") != env7
    monkeypatch.setenv(cli.SEED_ENV, "abc")
    assert cli.main(["run-bcd", "--problem", b, "--max-iters", "3"]) == 2


def test_oracle_prox_commands(capsys):
    assert cli.main(["oracle", "prox", "--atom", "l1", "--lambda", "1", "--t", "1", "--x", "3"]) == 0
    out = capsys.readouterr().out
    assert "analytic: 2" in out
    assert cli.main(["oracle", "prox", "--atom", "zero", "--x", "7"]) == 0
    assert "analytic: 7" in capsys.readouterr().out
    assert cli.main(["oracle", "prox", "--atom", "box", "--lo", "0", "--hi", "1", "--x", "5,-3,0.5"]) == 0


def test_oracle_rejects_unknown_atom(capsys):
    assert cli.main(["oracle", "prox", "--atom", "l0", "--x", "1"]) == 2
    assert cli.main(["oracle", "prox", "--atom", "l1"]) == 2


def test_oracle_grad_and_subdiff(capsys):
    x = ",".join(["0.5"] * 40)
    assert cli.main(["oracle", "grad", "--builtin", "quadratic", "--x", x]) == 0
    err = float(capsys.readouterr().out.rsplit(":", 1)[1])
    assert err < 1e-9
    assert cli.main(["oracle", "grad", "--builtin", "consensus-lasso"]) == 0
    assert cli.main(["oracle", "grad", "--builtin", "consensus-lasso", "--block", "2"]) == 2
    assert cli.main(["oracle", "subdiff-dist", "--atom", "l1", "--lambda", "1", "--x", "0,2", "--u", "1.5,0"]) == 0


def test_list_and_export(tmp_path, capsys):
    assert cli.main(["list-problems", "--export", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for name in BUILTINS:
        assert name in out
        assert load_problem(str(tmp_path / f"{name}.json")).dumps() == builtin(name).dumps()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "blockopt", "oracle", "prox", "--atom", "l1", "--x", "3"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "analytic: 2" in res.stdout
