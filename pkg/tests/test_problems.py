import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eqadmm.metrics import InvalidInputError
from eqadmm.problems import (
    GraphFormProblem,
    OracleFailure,
    SeparableFunction,
    gen_lasso,
    gen_lp,
    lasso_optimality_residual,
    lasso_oracle,
    load_problem,
    save_problem,
    scaled_prox,
    soft_threshold,
)
from oracles import golden_section


def test_l1_example():
    out = scaled_prox(SeparableFunction.l1(1.0), 1.0, [2.0, -0.5, 0.0])
    np.testing.assert_array_equal(out, [1.0, 0.0, 0.0])


def test_indicator_example():
    out = scaled_prox(SeparableFunction.indicator_leq([0.0, 0.0]), 1.0, [-1.0, 3.0])
    np.testing.assert_array_equal(out, [-1.0, 0.0])


def test_quadratic_composed_with_inverse_diagonal():
    # f(D^{-1} u) with D = 2 is the composed scale 1/2
    fn = SeparableFunction.quadratic([1.0])
    u = scaled_prox(fn, 0.5, [0.0])[0]
    ref = golden_section(lambda t: 0.5 * (0.5 * t - 1.0) ** 2 + 0.5 * t * t, -10, 10, tol=1e-14)
    # comparing function values near a minimum resolves u only to ~sqrt(eps)
    assert u == pytest.approx(ref, abs=2e-8)
    assert u == pytest.approx(0.4, abs=1e-15)


def test_linear_and_zero():
    np.testing.assert_array_equal(scaled_prox(SeparableFunction.linear([1.0, -2.0]), [2.0, 1.0], [0.0, 0.0]),
                                  [-2.0, 2.0])
    v = np.array([3.0, -1.0])
    out = scaled_prox(SeparableFunction.zero(), 5.0, v)
    np.testing.assert_array_equal(out, v)
    assert out is not v


@pytest.mark.parametrize("scale", [0.0, -1.0, np.inf])
def test_bad_scale(scale):
    with pytest.raises(InvalidInputError):
        scaled_prox(SeparableFunction.l1(1.0), scale, [1.0])


def test_unknown_kind_and_missing_params():
    with pytest.raises(InvalidInputError):
        SeparableFunction("huber")
    with pytest.raises(InvalidInputError):
        SeparableFunction("quadratic")
    with pytest.raises(InvalidInputError):
        SeparableFunction.l1(-1.0)


def _random_fn(rng):
    kind = rng.choice(["quadratic", "l1", "indicator_leq", "linear", "zero"])
    b = rng.normal(0, 2, size=1)
    if kind == "quadratic":
        return SeparableFunction.quadratic(b)
    if kind == "l1":
        return SeparableFunction.l1(rng.uniform(0, 3))
    if kind == "indicator_leq":
        return SeparableFunction.indicator_leq(b)
    if kind == "linear":
        return SeparableFunction.linear(b)
    return SeparableFunction.zero()


def _numeric_prox(fn, s, v):
    lo, hi = v - 50.0, v + 50.0
    if fn.kind == "indicator_leq":
        hi = min(hi, fn.b[0] / s)
        lo = min(lo, hi - 1.0)
    return golden_section(lambda u: fn([s * u]) + 0.5 * (u - v) ** 2, lo, hi, tol=1e-13)


@pytest.mark.parametrize("unit_scale", [True, False])
def test_prox_matches_one_dimensional_minimization(unit_scale):
    rng = np.random.default_rng(99 if unit_scale else 100)
    for _ in range(1000):
        fn = _random_fn(rng)
        s = 1.0 if unit_scale else 10 ** rng.uniform(-1, 1)
        v = rng.normal(0, 5)
        got = scaled_prox(fn, s, [v])[0]
        assert got == pytest.approx(_numeric_prox(fn, s, v), abs=1e-6), (fn, s, v)


@given(st.integers(0, 100_000))
def test_prox_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    n = 6
    kinds = [SeparableFunction.quadratic(rng.normal(size=n)), SeparableFunction.l1(rng.uniform(0, 2)),
             SeparableFunction.indicator_leq(rng.normal(size=n)), SeparableFunction.linear(rng.normal(size=n)),
             SeparableFunction.zero()]
    s = 10 ** rng.uniform(-2, 2, size=n)
    v, w = rng.normal(0, 3, size=n), rng.normal(0, 3, size=n)
    for fn in kinds:
        d = np.linalg.norm(scaled_prox(fn, s, v) - scaled_prox(fn, s, w))
        assert d <= np.linalg.norm(v - w) * (1 + 1e-12)


def test_function_values():
    assert SeparableFunction.quadratic([1.0, 2.0])([1.0, 4.0]) == 2.0
    assert SeparableFunction.l1(0.5)([1.0, -3.0]) == 2.0
    assert SeparableFunction.indicator_leq([1.0])([1.0]) == 0.0
    assert SeparableFunction.indicator_leq([1.0])([1.1]) == np.inf
    assert SeparableFunction.linear([1.0, 2.0])([3.0, -1.0]) == 1.0


def test_problem_shape_validation():
    with pytest.raises(InvalidInputError):
        GraphFormProblem(np.ones((3, 2)), SeparableFunction.quadratic(np.ones(2)), SeparableFunction.zero())


class TestGenerators:
    def test_lasso_shape_and_determinism(self):
        p1, p2 = gen_lasso(750, 250, 3), gen_lasso(750, 250, 3)
        assert p1.A.shape == (750, 250)
        np.testing.assert_array_equal(p1.A, p2.A)
        np.testing.assert_array_equal(p1.f.b, p2.f.b)
        assert p1.g.lam == p2.g.lam
        assert not np.array_equal(p1.A, gen_lasso(750, 250, 4).A)

    def test_lasso_lambda_consistent(self):
        p = gen_lasso(40, 20, 1)
        assert p.g.lam == pytest.approx(0.1 * np.max(np.abs(p.A.T @ p.f.b)), rel=1e-15)
        assert p.meta["lam"] == p.g.lam
        assert np.count_nonzero(p.meta["x0"]) == 2

    def test_lasso_objective_is_half_squares(self):
        p = gen_lasso(10, 5, 0)
        x = np.ones(5)
        r = p.A @ x - p.f.b
        assert p.objective(x) == pytest.approx(0.5 * r @ r + p.g.lam * 5)

    def test_lp_feasibility_and_dual(self):
        p = gen_lp(60, 20, 2)
        assert np.all(p.A @ p.meta["x0"] < p.f.b)
        assert np.all(p.meta["mu"] > 0)
        np.testing.assert_allclose(p.g.c + p.A.T @ p.meta["mu"], 0.0, atol=1e-12)

    def test_column_scaling(self):
        p = gen_lasso(100, 30, 0, col_decades=2)
        cn = np.linalg.norm(p.A, axis=0)
        assert cn.max() / cn.min() > 100

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            gen_lasso(0, 3, 0)
        with pytest.raises(InvalidInputError):
            gen_lp(3, 0, 0)


class TestLassoOracle:
    def test_threshold_case(self):
        rng = np.random.default_rng(0)
        A, b = rng.standard_normal((20, 8)), rng.standard_normal(20)
        lam = np.max(np.abs(A.T @ b))
        prob = GraphFormProblem(A, SeparableFunction.quadratic(b), SeparableFunction.l1(lam))
        x, obj = lasso_oracle(prob)
        np.testing.assert_array_equal(x, 0.0)
        assert obj == pytest.approx(0.5 * b @ b)

    def test_scalar_closed_form(self):
        rng = np.random.default_rng(1)
        a, b = rng.standard_normal((15, 1)), rng.standard_normal(15)
        lam = 0.3 * abs(a[:, 0] @ b)
        prob = GraphFormProblem(a, SeparableFunction.quadratic(b), SeparableFunction.l1(lam))
        x, _ = lasso_oracle(prob, tol=1e-12)
        expected = soft_threshold(a[:, 0] @ b, lam) / (a[:, 0] @ a[:, 0])
        assert x[0] == pytest.approx(expected, abs=1e-10)

    def test_orthogonal_design(self):
        rng = np.random.default_rng(2)
        Q, _ = np.linalg.qr(rng.standard_normal((30, 10)))
        b = rng.standard_normal(30)
        lam = 0.5 * np.median(np.abs(Q.T @ b))
        prob = GraphFormProblem(Q, SeparableFunction.quadratic(b), SeparableFunction.l1(lam))
        x, _ = lasso_oracle(prob, tol=1e-12)
        np.testing.assert_allclose(x, soft_threshold(Q.T @ b, lam), atol=1e-10)

    def test_reaches_tolerance(self):
        prob = gen_lasso(200, 80, 5, col_decades=1)
        x, _ = lasso_oracle(prob, tol=1e-9)
        assert lasso_optimality_residual(prob.A, prob.f.b, prob.g.lam, x) <= 1e-9

    def test_iteration_cap(self):
        with pytest.raises(OracleFailure):
            lasso_oracle(gen_lasso(50, 20, 0), tol=1e-14, max_iter=3)

    def test_rejects_non_lasso(self):
        with pytest.raises(InvalidInputError):
            lasso_oracle(gen_lp(10, 3, 0))


@pytest.mark.parametrize("gen", [gen_lasso, gen_lp])
def test_save_load_round_trip(tmp_path, gen):
    prob = gen(12, 5, 7)
    save_problem(prob, tmp_path / "prob")
    back = load_problem(tmp_path / "prob")
    np.testing.assert_array_equal(back.A, prob.A)
    assert back.f.kind == prob.f.kind and back.g.kind == prob.g.kind
    for a, b in ((back.f, prob.f), (back.g, prob.g)):
        for attr in ("b", "c"):
            if getattr(b, attr) is not None:
                np.testing.assert_array_equal(getattr(a, attr), getattr(b, attr))
        assert a.lam == b.lam
    assert back.meta["seed"] == 7 and back.kind == prob.kind
    np.testing.assert_array_equal(back.meta["x0"], prob.meta["x0"])
