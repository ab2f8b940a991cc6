import json
import subprocess
import sys

import numpy as np
import pytest

from ratinterp import io
from ratinterp.cee import SolverOptions
from ratinterp.cli import main
from ratinterp.errors import InvalidProblem
from ratinterp.problem import InterpolationProblem

from .conftest import DATA, REFERENCE_A, REFERENCE_B, example1, example_sigma


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def status(out):
    return out.rstrip("\n").splitlines()[-1]


def test_matrix_encoding_roundtrip():
    M = np.arange(6.0).reshape(2, 3)
    enc = io.encode_matrix(M)
    assert enc == {"shape": [2, 3], "data": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]}
    np.testing.assert_array_equal(io.decode_matrix(enc), M)
    np.testing.assert_array_equal(io.decode_matrix([[1, 2], [3, 4]]), [[1, 2], [3, 4]])
    with pytest.raises(InvalidProblem):
        io.decode_matrix({"shape": [2, 2], "data": [1, 2, 3]})


def test_problem_file_roundtrip(tmp_path):
    opts = SolverOptions(newton_tol=1e-11)
    d = io.problem_to_dict(example1(), example_sigma(), opts)
    io.dump_json(d, tmp_path / "p.json")
    problem, sigma, raw = io.problem_from_dict(io.load_json(tmp_path / "p.json"))
    assert problem.nodes == (0.0, 0.5) and problem.multiplicities == (1, 2)
    for key, val in example1().values.items():
        np.testing.assert_array_equal(problem.values[key], val)
    np.testing.assert_array_equal(sigma.coeff, example_sigma().coeff)
    assert io.solver_options(raw) == opts
    assert io.problem_to_dict(problem, sigma, opts) == d


def test_sigma_from_roots():
    s = io.decode_sigma({"roots": [0.1, 0.2]}, 2)
    assert s.spec.n == 2
    np.testing.assert_allclose(s(0.5), 0.4 * 0.3 * np.eye(2))


def test_unknown_option_rejected():
    with pytest.raises(InvalidProblem):
        io.solver_options({"bogus": 1})


def test_solve_example1(tmp_path, capsys):
    out_file = tmp_path / "sol.json"
    code, out, _ = run(capsys, "solve", DATA / "example1.json", "-o", out_file)
    assert code == 0
    assert status(out) == "status=ok exit=0 command=solve"
    sol = json.loads(out_file.read_text())
    assert sol["rank_P"] == 4 and sol["residuals"]["interpolation"] < 1e-8
    assert len(sol["p_eigenvalues"]) == 4


def test_solve_example2_matches_reference(tmp_path, capsys):
    out_file = tmp_path / "sol.json"
    code, _, _ = run(capsys, "solve", DATA / "example2.json", "-o", out_file)
    assert code == 0
    parts = io.solution_parts(io.load_json(out_file))
    np.testing.assert_allclose(parts["A"].coeff, REFERENCE_A, atol=1e-3)
    np.testing.assert_allclose(parts["B"].coeff, REFERENCE_B, atol=1e-3)


def test_solve_unequal_indices_exit_2(capsys):
    code, out, err = run(capsys, "solve", DATA / "example1_indices31.json", "-o", "/dev/null")
    assert code == 2
    assert "L singular: unequal observability indices" in err
    assert status(out).startswith("status=error exit=2 command=solve")


def test_solve_trivial(tmp_path, capsys):
    out_file = tmp_path / "sol.json"
    code, out, _ = run(capsys, "solve", DATA / "trivial.json", "-o", out_file)
    assert code == 0
    sol = json.loads(out_file.read_text())
    assert sol["rank_P"] == 0
    np.testing.assert_allclose(io.decode_matrix(sol["G"]), 0, atol=1e-14)


def test_solve_infeasible_exit_2(tmp_path, capsys):
    bad = InterpolationProblem.from_lists(1, [0.0, 0.5], [1, 1], [[np.array([[0.5]])], [np.array([[-3.0]])]])
    d = io.problem_to_dict(bad)
    d["sigma"] = {"roots": [0.1]}
    io.dump_json(d, tmp_path / "bad.json")
    code, out, err = run(capsys, "solve", tmp_path / "bad.json")
    assert code == 2 and "Pick" in err


def test_solve_malformed_exit_1(tmp_path, capsys):
    (tmp_path / "x.json").write_text("{not json")
    code, out, _ = run(capsys, "solve", tmp_path / "x.json")
    assert code == 1 and status(out).startswith("status=error exit=1")
    (tmp_path / "y.json").write_text(json.dumps({"ell": 1}))
    assert run(capsys, "solve", tmp_path / "y.json")[0] == 1
    d = io.problem_to_dict(example1())
    io.dump_json(d, tmp_path / "nosigma.json")
    assert run(capsys, "solve", tmp_path / "nosigma.json")[0] == 1
    assert run(capsys, "solve", tmp_path / "missing.json")[0] == 1


def test_solver_failure_exit_3(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", DATA / "example1.json", "-o", tmp_path / "s.json", "--max-steps", "1")
    assert code == 3 and status(out).endswith("reason=solver")


def test_solver_flags_forwarded(tmp_path, capsys):
    out_file = tmp_path / "s.json"
    code, _, _ = run(capsys, "solve", DATA / "example1.json", "-o", out_file, "--grid", "64", "--newton-tol", "1e-11",
                     "--rank-tol", "0.5")
    assert code == 0
    # with a loose rank threshold the smallest P eigenvalues no longer count
    assert json.loads(out_file.read_text())["rank_P"] < 4


def test_verify_pass_and_perturbed_fail(tmp_path, capsys):
    sol_file = tmp_path / "sol.json"
    run(capsys, "solve", DATA / "example1.json", "-o", sol_file)
    code, out, _ = run(capsys, "verify", sol_file, DATA / "example1.json")
    assert code == 0 and "pass: true" in out
    d = json.loads(sol_file.read_text())
    d["A"]["data"][0] += 1e-2
    (tmp_path / "bad.json").write_text(json.dumps(d))
    code, out, _ = run(capsys, "verify", tmp_path / "bad.json", DATA / "example1.json")
    assert code == 4 and "pass: false" in out
    assert status(out) == "status=error exit=4 command=verify reason=certification"
    fields = dict(line.split(": ", 1) for line in out.splitlines() if ": " in line)
    assert float(fields["interp_residual"]) > 1e-8


def test_verify_trivial(tmp_path, capsys):
    run(capsys, "solve", DATA / "trivial.json", "-o", tmp_path / "s.json")
    assert run(capsys, "verify", tmp_path / "s.json", DATA / "trivial.json")[0] == 0


def test_verify_malformed(tmp_path, capsys):
    (tmp_path / "s.json").write_text(json.dumps({"format": "other"}))
    assert run(capsys, "verify", tmp_path / "s.json", DATA / "example1.json")[0] == 1


def test_covext_exact_deterministic(tmp_path, capsys):
    outputs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "covext", "--system", DATA / "reduction_system.json", "--lags", 5, "--exact-cov",
                           "--reduce-to", 3, "--reduced-roots", "0.1,0.3,-0.95", "--points", 32, "--out", tmp_path / name)
        assert code == 0
        outputs.append(out.replace(str(tmp_path / name), "<dir>"))
    assert outputs[0] == outputs[1]
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert {"covariances.csv", "solution.json", "p_spectrum.csv", "svgrid.csv"} <= set(files)
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_covext_simulated_gap(tmp_path, capsys):
    code, out, _ = run(capsys, "covext", "--system", DATA / "reduction_system.json", "--lags", 5, "--seed", 7,
                       "--samples", 100000, "--points", 16, "--out", tmp_path)
    assert code == 0
    rows = np.loadtxt(tmp_path / "p_spectrum.csv", delimiter=",", skiprows=1, usecols=2)
    assert np.sum(rows < 1e-2 * rows.max()) >= 4
    cov = io.read_covariances(tmp_path / "covariances.csv")
    assert len(cov.lags) == 6 and cov.ell == 2


def test_covext_zero_series_exit_2(tmp_path, capsys):
    (tmp_path / "y.csv").write_text("y1,y2\n" + "0.0,0.0\n" * 50)
    code, out, err = run(capsys, "covext", "--series", tmp_path / "y.csv", "--lags", 2, "--sigma-roots", "0.1,0.2",
                         "--out", tmp_path / "o")
    assert code == 2 and "singular" in err
    assert status(out).startswith("status=error exit=2 command=covext")


def test_covext_series_input(tmp_path, capsys):
    rng = np.random.default_rng(0)
    y = rng.standard_normal((2000, 1))
    y[1:] += 0.5 * y[:-1]
    np.savetxt(tmp_path / "y.csv", y, delimiter=",", header="y1", comments="")
    code, _, _ = run(capsys, "covext", "--series", tmp_path / "y.csv", "--lags", 2, "--sigma-roots", "0.2,-0.3",
                     "--out", tmp_path / "o")
    assert code == 0


def test_reduce_and_svgrid(tmp_path, capsys):
    run(capsys, "covext", "--system", DATA / "reduction_system.json", "--lags", 5, "--exact-cov", "--points", 8,
        "--out", tmp_path)
    code, out, _ = run(capsys, "reduce", "--covariances", tmp_path / "covariances.csv", "--order", 3,
                       "--sigma-roots", "0.1,0.3,-0.95", "--points", 8, "--out", tmp_path / "r")
    assert code == 0 and (tmp_path / "r" / "solution.json").exists()
    code, out, _ = run(capsys, "svgrid", "--solution", tmp_path / "r" / "solution.json", "--points", 5)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "theta,s1,s2" and len(lines) == 7
    code, out, _ = run(capsys, "svgrid", "--system", DATA / "reduction_system.json", "-o", tmp_path / "g.csv")
    assert code == 0 and len((tmp_path / "g.csv").read_text().splitlines()) == 257


def test_argument_errors_keep_status_line(capsys):
    code, out, _ = run(capsys, "nonsense")
    assert code == 1 and status(out) == "status=error exit=1 command=none"
    code, out, _ = run(capsys, "reduce", "--covariances", "x.csv", "--order", 3, "--sigma-roots", "0.1")
    assert code == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "ratinterp.cli", "solve", str(DATA / "example2.json"), "-o",
                          str(tmp_path / "s.json")], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[-1] == "status=ok exit=0 command=solve"
