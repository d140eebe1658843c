"""Graph-form problems, separable functions with scaled proxes, generators
and the independent lasso reference solver."""

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import mmio
from .metrics import InvalidInputError, as_matrix

KINDS = ("quadratic", "l1", "indicator_leq", "linear", "zero")


@dataclass
class SeparableFunction:
    """A separable convex function of one vector argument ``w``.

    ========================  =================================
    kind                      value
    ========================  =================================
    ``quadratic``             ``(1/2) ||w - b||^2``
    ``l1``                    ``lam ||w||_1``
    ``indicator_leq``         ``0`` if ``w <= b`` else ``+inf``
    ``linear``                ``c^T w``
    ``zero``                  ``0``
    ========================  =================================
    """

    kind: str
    b: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown function kind {self.kind!r}")
        if self.kind in ("quadratic", "indicator_leq"):
            if self.b is None:
                raise InvalidInputError(f"{self.kind} needs b")
            self.b = np.asarray(self.b, dtype=float)
        if self.kind == "linear":
            if self.c is None:
                raise InvalidInputError("linear needs c")
            self.c = np.asarray(self.c, dtype=float)
        if self.kind == "l1" and self.lam < 0:
            raise InvalidInputError("l1 weight must be nonnegative")

    @classmethod
    def quadratic(cls, b):
        return cls("quadratic", b=b)

    @classmethod
    def l1(cls, lam):
        return cls("l1", lam=float(lam))

    @classmethod
    def indicator_leq(cls, b):
        return cls("indicator_leq", b=b)

    @classmethod
    def linear(cls, c):
        return cls("linear", c=c)

    @classmethod
    def zero(cls):
        return cls("zero")

    def __call__(self, w) -> float:
        w = np.asarray(w, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * float(np.sum((w - self.b) ** 2))
        if self.kind == "l1":
            return self.lam * float(np.sum(np.abs(w)))
        if self.kind == "indicator_leq":
            # relative slack absorbs rounding from the diagonal scaling round trip
            ok = np.all(w <= self.b + 1e-9 * np.maximum(1.0, np.abs(self.b)))
            return 0.0 if ok else np.inf
        if self.kind == "linear":
            return float(self.c @ w)
        return 0.0

    def prox(self, v, scale=1.0):
        return scaled_prox(self, scale, v)


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def scaled_prox(fn: SeparableFunction, scale, v) -> np.ndarray:
    """``argmin_u fn(scale * u) + (1/2) ||u - v||^2`` elementwise.

    ``scale`` is a positive scalar or vector (the diagonal composed with
    ``fn``).
    """
    v = np.asarray(v, dtype=float)
    s = np.asarray(scale, dtype=float)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise InvalidInputError("prox scale must be finite and positive")
    return prox_kernel(fn, s, v)


def prox_kernel(fn, s, v):
    # unchecked inner loop version of scaled_prox
    kind = fn.kind
    if kind == "quadratic":
        return (v + s * fn.b) / (1.0 + s * s)
    if kind == "l1":
        return soft_threshold(v, fn.lam * s)
    if kind == "indicator_leq":
        return np.minimum(v, fn.b / s)
    if kind == "linear":
        return v - s * fn.c
    return v.copy()


@dataclass
class GraphFormProblem:
    """minimize ``f(y) + g(x)`` subject to ``A x = y``."""

    A: np.ndarray
    f: SeparableFunction
    g: SeparableFunction
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = as_matrix(self.A)
        m, n = self.A.shape
        for fn, dim, name in ((self.f, m, "f"), (self.g, n, "g")):
            for attr in ("b", "c"):
                vec = getattr(fn, attr)
                if vec is not None and vec.shape != (dim,):
                    raise InvalidInputError(f"{name}.{attr} has shape {vec.shape}, expected ({dim},)")

    @property
    def shape(self):
        return self.A.shape

    @property
    def kind(self):
        return self.meta.get("kind", "custom")

    def objective(self, x, y=None) -> float:
        """``f(y) + g(x)``; ``y`` defaults to ``A x``."""
        if y is None:
            y = self.A @ x
        return self.f(y) + self.g(x)


# --- generators ---

def _column_scales(rng, n, decades):
    return 10.0 ** rng.uniform(-decades, decades, size=n)


def gen_gaussian(m, n, seed, col_decades=0.0) -> np.ndarray:
    """Standard normal ``m x n`` matrix, columns optionally scaled by
    ``10**U(-col_decades, col_decades)``."""
    if m < 1 or n < 1:
        raise InvalidInputError("m and n must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    if col_decades:
        A *= _column_scales(rng, n, col_decades)[None, :]
    return A


def gen_lasso(m, n, seed, col_decades=0.0, density=0.1, noise=0.1, lam_ratio=0.1):
    """Random lasso ``(1/2)||Ax - b||^2 + lam ||x||_1``.

    ``A`` is standard normal (columns optionally multiplied by
    ``10**U(-col_decades, col_decades)``), the ground truth has ``density``
    standard normal nonzeros, ``b = A x0 + noise * N(0, 1)`` and
    ``lam = lam_ratio * ||A^T b||_inf``.
    """
    if m < 1 or n < 1:
        raise InvalidInputError("m and n must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    if col_decades:
        A *= _column_scales(rng, n, col_decades)[None, :]
    x0 = np.zeros(n)
    k = max(1, int(round(density * n)))
    idx = rng.choice(n, size=k, replace=False)
    x0[idx] = rng.standard_normal(k)
    b = A @ x0 + noise * rng.standard_normal(m)
    lam = lam_ratio * float(np.max(np.abs(A.T @ b)))
    meta = {"kind": "lasso", "seed": seed, "lam": lam, "col_decades": col_decades}
    prob = GraphFormProblem(A, SeparableFunction.quadratic(b), SeparableFunction.l1(lam), meta)
    prob.meta["x0"] = x0
    return prob


def gen_lp(m, n, seed, col_decades=0.0):
    """Random feasible, bounded LP ``min c^T x  s.t.  A x <= b``.

    ``b = A x0 + |s|`` makes ``x0`` strictly feasible and ``c = -A^T mu``
    with ``mu > 0`` makes the dual feasible.
    """
    if m < 1 or n < 1:
        raise InvalidInputError("m and n must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    if col_decades:
        A *= _column_scales(rng, n, col_decades)[None, :]
    x0 = rng.standard_normal(n)
    slack = np.abs(rng.standard_normal(m))
    slack[slack == 0] = 1.0
    b = A @ x0 + slack
    mu = rng.uniform(0.1, 1.0, size=m)
    c = -A.T @ mu
    meta = {"kind": "lp", "seed": seed, "col_decades": col_decades, "x0": x0, "mu": mu}
    return GraphFormProblem(A, SeparableFunction.indicator_leq(b), SeparableFunction.linear(c), meta)


# --- independent reference ---

class OracleFailure(RuntimeError):
    pass


def lasso_data(prob: GraphFormProblem):
    if prob.f.kind != "quadratic" or prob.g.kind != "l1":
        raise InvalidInputError("not a lasso problem")
    return prob.A, prob.f.b, prob.g.lam


def lasso_optimality_residual(A, b, lam, x) -> float:
    """Largest violation of ``0 in A^T(Ax - b) + lam * sign(x)``."""
    grad = A.T @ (A @ x - b)
    nz = x != 0
    res = np.where(nz, np.abs(grad + lam * np.sign(x)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(res.max()) if res.size else 0.0


def lasso_oracle(prob: GraphFormProblem, tol=1e-9, max_iter=1_000_000):
    """Solve the lasso by proximal gradient with backtracking.

    Runs until the subgradient optimality residual is at most ``tol``.
    Returns ``(x, objective)``.
    """
    A, b, lam = lasso_data(prob)
    n = A.shape[1]
    x = np.zeros(n)
    r = A @ x - b
    step = 1.0 / max(np.sum(A * A), 1e-300)  # 1 / ||A||_F^2 <= 1 / L
    for _ in range(max_iter):
        grad = A.T @ r
        if lasso_optimality_residual(A, b, lam, x) <= tol:
            return x, 0.5 * float(r @ r) + lam * float(np.abs(x).sum())
        while True:
            x_new = soft_threshold(x - step * grad, step * lam)
            dx = x_new - x
            Adx = A @ dx
            # sufficient decrease of the smooth part, with the linear terms
            # cancelled analytically: step * ||A dx||^2 <= ||dx||^2
            if step * (Adx @ Adx) <= dx @ dx:
                break
            step *= 0.5
        x, r = x_new, A @ x_new - b
        step *= 1.25  # let the step recover after backtracking
    raise OracleFailure(f"proximal gradient did not reach tol={tol} in {max_iter} iterations")


# --- serialization ---

def save_problem(prob: GraphFormProblem, directory) -> None:
    """Write ``A.mtx``, one vector file per parameter, and ``meta.txt``."""
    os.makedirs(directory, exist_ok=True)
    mmio.write_matrix(os.path.join(directory, "A.mtx"), prob.A)
    lines = []
    for name, fn in (("f", prob.f), ("g", prob.g)):
        lines.append(f"{name}_kind={fn.kind}")
        if fn.kind == "l1":
            lines.append(f"{name}_lam={fn.lam!r}")
        for attr in ("b", "c"):
            vec = getattr(fn, attr)
            if vec is not None:
                mmio.write_vector(os.path.join(directory, f"{name}_{attr}.txt"), vec)
    for key, val in prob.meta.items():
        if isinstance(val, np.ndarray):
            mmio.write_vector(os.path.join(directory, f"meta_{key}.txt"), val)
        else:
            lines.append(f"{key}={val}")
    with open(os.path.join(directory, "meta.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_scalar(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def load_problem(directory) -> GraphFormProblem:
    A = mmio.read_matrix(os.path.join(directory, "A.mtx"))
    kv = {}
    with open(os.path.join(directory, "meta.txt")) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                key, _, val = line.partition("=")
                kv[key.strip()] = val.strip()
    fns = {}
    for name in ("f", "g"):
        kwargs = {"kind": kv.pop(f"{name}_kind")}
        if f"{name}_lam" in kv:
            kwargs["lam"] = float(kv.pop(f"{name}_lam"))
        for attr in ("b", "c"):
            path = os.path.join(directory, f"{name}_{attr}.txt")
            if os.path.exists(path):
                kwargs[attr] = mmio.read_vector(path)
        fns[name] = SeparableFunction(**kwargs)
    meta = {k: _parse_scalar(v) for k, v in kv.items()}
    for entry in os.listdir(directory):
        if entry.startswith("meta_") and entry.endswith(".txt"):
            meta[entry[5:-4]] = mmio.read_vector(os.path.join(directory, entry))
    return GraphFormProblem(A, fns["f"], fns["g"], meta)
