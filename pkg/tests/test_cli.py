import csv
import subprocess
import sys

import numpy as np
import pytest

from eqadmm import cli
from eqadmm.equilibration import BoundCheck
from eqadmm.mmio import read_vector, write_matrix
from eqadmm.problems import GraphFormProblem, SeparableFunction, gen_lasso, lasso_oracle, save_problem


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("EQADMM_THREADS", "1")


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(*args):
    return cli.main([str(a) for a in args])


class TestEquilibrate:
    def test_identity(self, tmp_path):
        write_matrix(tmp_path / "I.mtx", np.eye(4))
        assert run("equilibrate", "--input", tmp_path / "I.mtx", "-o", tmp_path / "out") == 0
        (row,) = read_csv(tmp_path / "out" / "report.csv")
        assert float(row["r1"]) == 1.0 and float(row["r2"]) == 1.0
        assert float(row["kappa_before"]) == pytest.approx(1.0)
        assert float(row["kappa_after"]) == pytest.approx(1.0)
        assert len(read_vector(tmp_path / "out" / "d1.txt")) == 4

    @pytest.mark.parametrize("method", ["ruiz", "sinkhorn"])
    def test_generated(self, tmp_path, method):
        assert run("equilibrate", "--gen", "gaussian", "--method", method, "-o", tmp_path) == 0
        (row,) = read_csv(tmp_path / "report.csv")
        assert row["converged"] == "true" and int(row["iterations"]) < 100
        assert list(row) == cli.REPORT_COLUMNS

    def test_missing_file(self, tmp_path):
        out = tmp_path / "out"
        assert run("equilibrate", "--input", tmp_path / "nope.mtx", "-o", out) == 2
        assert not out.exists()

    def test_degenerate(self, tmp_path, capsys):
        A = np.ones((3, 3))
        A[1] = 0
        write_matrix(tmp_path / "Z.mtx", A, fmt="coordinate")
        out = tmp_path / "out"
        assert run("equilibrate", "--input", tmp_path / "Z.mtx", "-o", out) == 3
        assert "degenerate" in capsys.readouterr().err
        assert not out.exists()

    def test_bad_arguments(self, tmp_path):
        assert run("equilibrate", "--eps", "-1", "-o", tmp_path) == 2
        with pytest.raises(SystemExit) as exc:
            run("nonsense")
        assert exc.value.code == 2


class TestSolve:
    def test_lasso_matches_oracle(self, tmp_path, capsys):
        assert run("solve", "--gen", "lasso", "--seed", 3, "-o", tmp_path) == 0
        rows = read_csv(tmp_path / "trace.csv")
        out = capsys.readouterr().out
        assert "status=converged" in out
        assert f"iterations={len(rows)}" in out
        prob = gen_lasso(750, 250, 3)
        _, obj = lasso_oracle(prob)
        x = read_vector(tmp_path / "x.txt")
        assert prob.objective(x) == pytest.approx(obj, rel=1e-3)
        assert float(rows[-1]["objective"]) == pytest.approx(obj, rel=1e-3)

    def test_equilibration_helps_ill_conditioned(self, tmp_path):
        common = ["--gen", "lasso", "-m", 300, "-n", 100, "--col-decades", 3, "--max-iter", 20000]
        run("solve", *common, "-o", tmp_path / "eq")
        run("solve", *common, "--no-equilibration", "-o", tmp_path / "raw")
        assert len(read_csv(tmp_path / "eq" / "trace.csv")) < len(read_csv(tmp_path / "raw" / "trace.csv"))

    def test_zero_matrix_falls_back(self, tmp_path, capsys):
        prob = GraphFormProblem(np.zeros((5, 3)), SeparableFunction.quadratic(np.ones(5)),
                                SeparableFunction.l1(1.0))
        save_problem(prob, tmp_path / "p")
        assert run("solve", "--input", tmp_path / "p", "-o", tmp_path / "out") == 0
        assert "without equilibration" in capsys.readouterr().err
        np.testing.assert_allclose(read_vector(tmp_path / "out" / "x.txt"), 0.0, atol=1e-8)

    def test_max_iter_is_not_an_error(self, tmp_path, capsys):
        assert run("solve", "--gen", "lp", "-m", 60, "-n", 20, "--max-iter", 3, "-o", tmp_path) == 0
        assert "status=max_iter" in capsys.readouterr().out

    def test_adaptive_flag(self, tmp_path, capsys):
        assert run("solve", "--gen", "lasso", "-m", 100, "-n", 40, "--rho0", 100, "--adaptive", "on",
                   "-o", tmp_path) == 0
        out = capsys.readouterr().out
        assert "factorizations=1" in out and "adaptations=0" not in out


class TestSweep:
    def test_full_grid_rows_per_trial(self, tmp_path):
        assert run("sweep", "--gen", "lasso", "-m", 40, "-n", 15, "--trials", 2, "--max-iter", 300,
                   "-o", tmp_path) == 0
        rows = read_csv(tmp_path / "sweep.csv")
        assert len(rows) == 2 * 81
        assert list(rows[0]) == cli.SWEEP_COLUMNS
        mean = read_csv(tmp_path / "sweep_mean.csv")
        assert len(mean) == 81
        scal = sorted({float(r["scaling"]) for r in mean})
        assert scal[0] == pytest.approx(0.01) and scal[-1] == pytest.approx(100)
        best = min(float(r["iterations"]) for r in mean)
        assert best < 300
        assert all((r["is_min"] == "true") == (float(r["iterations"]) == best) for r in mean)
        # failures are averaged in at the cap
        for r in mean:
            cell = [t for t in rows if t["scaling"] == r["scaling"] and t["step"] == r["step"]]
            its = [int(t["iterations"]) if t["status"] == "converged" else 300 for t in cell]
            assert float(r["iterations"]) == pytest.approx(np.mean(its))

    def test_single_cell_matches_solve(self, tmp_path, capsys):
        run("sweep", "--gen", "lasso", "-m", 80, "-n", 30, "--grid", "1:1:1,1:1:1", "--step-unit", "one",
            "-o", tmp_path / "sw")
        run("solve", "--gen", "lasso", "-m", 80, "-n", 30, "-o", tmp_path / "s")
        (row,) = read_csv(tmp_path / "sw" / "sweep.csv")
        assert int(row["iterations"]) == len(read_csv(tmp_path / "s" / "trace.csv"))

    def test_lp_grid(self, tmp_path):
        assert run("sweep", "--gen", "lp", "-m", 60, "-n", 20, "--grid", "0.02:50:3,0.02:50:3",
                   "--step-unit", "inv-gamma", "--max-iter", 3000, "-o", tmp_path) == 0
        mean = read_csv(tmp_path / "sweep_mean.csv")
        assert len(mean) == 9 and any(r["is_min"] == "true" for r in mean)

    def test_bad_grid(self, tmp_path):
        assert run("sweep", "--grid", "1:2", "-o", tmp_path) == 2

    def test_deterministic(self, tmp_path):
        args = ["sweep", "--gen", "lasso", "-m", 30, "-n", 10, "--grid", "0.1:10:2,0.1:10:2", "--max-iter", 500]
        run(*args, "-o", tmp_path / "a")
        run(*args, "-o", tmp_path / "b")
        assert (tmp_path / "a" / "sweep.csv").read_text() == (tmp_path / "b" / "sweep.csv").read_text()


class TestCompareConsensus:
    def test_ordering(self, tmp_path):
        assert run("compare-consensus", "-m", 150, "-n", 50, "--trials", 2, "-o", tmp_path) == 0
        rows = read_csv(tmp_path / "comparison.csv")
        assert len(rows) == 2 and list(rows[0]) == cli.COMPARISON_COLUMNS
        for r in rows:
            assert int(r["iters_one"]) >= int(r["iters_rho"]) >= int(r["iters_equil"])
            assert r["ordered"] == "true"

    def test_orthogonal_columns_within_factor_two(self, tmp_path):
        rng = np.random.default_rng(0)
        Q, _ = np.linalg.qr(rng.standard_normal((60, 20)))
        b = rng.standard_normal(60)
        prob = GraphFormProblem(Q, SeparableFunction.quadratic(b),
                                SeparableFunction.l1(0.1 * np.abs(Q.T @ b).max()), {"seed": 0})
        save_problem(prob, tmp_path / "p")
        assert run("compare-consensus", "--input", tmp_path / "p", "-o", tmp_path / "out") == 0
        (r,) = read_csv(tmp_path / "out" / "comparison.csv")
        its = [int(r[k]) for k in ("iters_one", "iters_rho", "iters_equil")]
        assert max(its) <= 2 * min(its)

    def test_rejects_lp(self, tmp_path):
        assert run("compare-consensus", "--gen", "lp", "-o", tmp_path) == 2


class TestVerify:
    def test_default_dims(self, tmp_path):
        assert run("verify", "--trials", 100, "-o", tmp_path) == 0
        rows = read_csv(tmp_path / "verify.csv")
        assert {int(r["dim"]) for r in rows} == set(range(5, 21))
        assert all(r["holds"] == "true" for r in rows)

    def test_dimension_one_tight(self, tmp_path):
        assert run("verify", "--dim", 1, "--trials", 3, "-o", tmp_path) == 0
        for r in read_csv(tmp_path / "verify.csv"):
            # equality in every bound: the slack is exactly the absolute allowance
            assert float(r["worst_slack"]) == pytest.approx(1e-9, abs=1e-12)

    def test_near_singular_input_skipped(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        U, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        V, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        A = U @ np.diag([1, 0.5, 0.3, 0.2, 0.1, 1e-11]) @ V.T
        write_matrix(tmp_path / "S.mtx", A)
        assert run("verify", "--input", tmp_path / "S.mtx", "-o", tmp_path / "out") == 0
        assert "skipped" in capsys.readouterr().out

    def test_violation_writes_counterexample(self, tmp_path, monkeypatch):
        def fake(n, rng, n_diagonals=100):
            A = rng.standard_normal((n, n))
            return [BoundCheck("psi_optimality", False, -1.0, 1)], A, A.T @ A

        monkeypatch.setattr(cli, "verify_scaling_bounds", fake)
        assert run("verify", "--trials", 1, "-o", tmp_path) == 1
        assert (tmp_path / "counterexample_0_A.mtx").exists()


def test_help_documents_schemas(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    out = capsys.readouterr().out
    for cols in (cli.REPORT_COLUMNS, cli.TRACE_COLUMNS, cli.SWEEP_COLUMNS, cli.COMPARISON_COLUMNS):
        assert ",".join(cols) in out


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "eqadmm", "verify", "--trials", "2", "--dim", "3",
                          "-o", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "0 violations" in res.stdout
