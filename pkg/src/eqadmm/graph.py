"""Graph projection splitting with diagonal scaling.

The solver works on the scaled problem

    minimize    f(D^{-1} yt) + g(E xt)
    subject to  yt = (D A E) xt

with ``D = alpha * Dhat`` and ``E = beta * Ehat``, where ``Dhat A Ehat`` is
equilibrated. ``alpha * beta`` fixes ``M = D A E`` (and so the cached
factorization); ``beta / alpha`` acts as a step size and may change every
iteration at no factorization cost. The effective ADMM penalty is
proportional to ``alpha / beta``.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dpotrs

from .equilibration import DiagonalScaling, ruiz
from .metrics import InvalidInputError, as_matrix, spectral_norm
from .problems import GraphFormProblem, prox_kernel


@dataclass(frozen=True)
class ScalingPlan:
    d_hat: DiagonalScaling
    gamma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.alpha > 0 and self.beta > 0):
            raise InvalidInputError("gamma, alpha and beta must be positive")

    @property
    def D(self) -> np.ndarray:
        return self.alpha * self.d_hat.d1

    @property
    def E(self) -> np.ndarray:
        return self.beta * self.d_hat.d2

    @property
    def scaling(self) -> float:
        """``alpha * beta``."""
        return self.alpha * self.beta

    @property
    def step(self) -> float:
        """``beta / alpha``."""
        return self.beta / self.alpha

    @property
    def operator_norm(self) -> float:
        """``||D A E|| = alpha * beta * gamma``."""
        return self.alpha * self.beta * self.gamma

    def with_params(self, scaling=None, step=None) -> "ScalingPlan":
        s = self.scaling if scaling is None else scaling
        t = self.step if step is None else step
        return replace(self, alpha=float(np.sqrt(s / t)), beta=float(np.sqrt(s * t)))


def plan_scaling(A, p=2, target_norm=1.0, rho0=1.0, equilibrate=True,
                 eps=1e-6, max_iter=100) -> ScalingPlan:
    """Equilibrate ``A`` and pick ``alpha, beta`` with ``||DAE|| = target_norm``
    and ``beta / alpha = rho0``.

    With ``equilibrate=False`` the base scaling is the identity. A zero matrix
    gets ``gamma = 1`` since there is nothing to normalize.
    """
    A = as_matrix(A)
    if target_norm <= 0 or rho0 <= 0:
        raise InvalidInputError("target_norm and rho0 must be positive")
    m, n = A.shape
    if equilibrate:
        d_hat, _ = ruiz(A, p=p, eps=eps, max_iter=max_iter, compute_kappa=False)
    else:
        d_hat = DiagonalScaling.identity(m, n)
    gamma = spectral_norm(d_hat.apply(A)) if np.any(A) else 1.0
    ab = target_norm / gamma
    return ScalingPlan(d_hat, gamma, float(np.sqrt(ab / rho0)), float(np.sqrt(ab * rho0)))


class ProjectionCache:
    """Cached factorization for projecting onto ``{(x, y) : M x = y}``.

    Factors ``I + M^T M`` (or ``I + M M^T`` when ``M`` is wide) once;
    ``refactor_count`` counts factorizations performed.
    """

    def __init__(self, M):
        self.M = None
        self.factor = None
        self.refactor_count = 0
        self.update(M)

    def update(self, M) -> None:
        M = np.asarray(M, dtype=float)
        if self.M is not None and (M is self.M or np.array_equal(M, self.M)):
            return
        self.M = M
        m, n = M.shape
        self._tall = m >= n
        K = M.T @ M if self._tall else M @ M.T
        K[np.diag_indices_from(K)] += 1.0
        self.factor = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
        self.refactor_count += 1


def graph_project(cache: ProjectionCache, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """Euclidean projection of ``(x, y)`` onto the graph of ``cache.M``."""
    M = cache.M
    L = cache.factor[0]
    if cache._tall:
        xp, info = dpotrs(L, x + M.T @ y, lower=1)
    else:
        w, info = dpotrs(L, y - M @ x, lower=1)
        xp = x + M.T @ w
    if info != 0:
        raise np.linalg.LinAlgError(f"dpotrs failed with info={info}")
    return xp, M @ xp


def graph_project_block(M, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """Projection through the explicit ``(m+n) x (m+n)`` block inverse.

    Slow; kept as a cross-check for :func:`graph_project`.
    """
    M = np.asarray(M, dtype=float)
    m, n = M.shape
    K = np.block([[np.eye(n), M.T], [M, -np.eye(m)]])
    R = np.block([[np.eye(n), M.T], [np.zeros((m, n)), np.zeros((m, m))]])
    z = np.linalg.inv(K) @ (R @ np.concatenate([x, y]))
    return z[:n], z[n:]


@dataclass
class SolverConfig:
    tol: float = 1e-4
    atol: float = 1e-9
    max_iter: int = 100_000
    adaptive: bool = False
    mu: float = 10.0
    tau: float = 2.0
    max_adaptations: int = 50
    record_iterates: bool = False


@dataclass
class GraphState:
    """Scaled iterates: prox outputs ``x_t, y_t``, projections ``x_p, y_p``
    and scaled duals ``u_x, u_y``."""

    x_t: np.ndarray
    y_t: np.ndarray
    x_p: np.ndarray
    y_p: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray

    @classmethod
    def zeros(cls, m, n):
        return cls(*(np.zeros(k) for k in (n, m, n, m, n, m)))

    def rescale(self, s) -> None:
        """Change of units when ``D -> s D`` and ``E -> E / s``."""
        self.x_t *= s
        self.y_t *= s
        self.x_p *= s
        self.y_p *= s
        self.u_x /= s
        self.u_y /= s


@dataclass
class SolveTrace:
    status: str = "max_iter"
    iterations: int = 0
    objective: List[float] = field(default_factory=list)
    r_primal: List[float] = field(default_factory=list)
    r_dual: List[float] = field(default_factory=list)
    eps_primal: List[float] = field(default_factory=list)
    eps_dual: List[float] = field(default_factory=list)
    r_primal_unscaled: List[float] = field(default_factory=list)
    r_dual_unscaled: List[float] = field(default_factory=list)
    step_history: List[float] = field(default_factory=list)
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    # subgradients of g at x and f at y recovered from the scaled duals
    dual_x: Optional[np.ndarray] = None
    dual_y: Optional[np.ndarray] = None
    state: Optional[GraphState] = None
    plan: Optional[ScalingPlan] = None
    refactor_count: int = 0
    adaptations: int = 0
    iterates: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def final_objective(self) -> float:
        return self.objective[-1] if self.objective else float("nan")


def adapt_step(plan: ScalingPlan, r_primal, r_dual, mu=10.0, tau=2.0) -> ScalingPlan:
    """Residual balancing on ``beta / alpha`` with ``alpha * beta`` held fixed.

    The penalty grows with ``alpha / beta``, so a dominant primal residual
    shrinks ``beta / alpha`` by ``tau`` and a dominant dual residual grows it.
    """
    if mu <= 1 or tau <= 1:
        raise InvalidInputError("mu and tau must exceed 1")
    root = np.sqrt(tau)
    if r_primal > mu * r_dual:
        return replace(plan, alpha=plan.alpha * root, beta=plan.beta / root)
    if r_dual > mu * r_primal:
        return replace(plan, alpha=plan.alpha / root, beta=plan.beta * root)
    return plan


def solve_graph_form(prob: GraphFormProblem, plan: ScalingPlan, cfg: SolverConfig = None,
                     state: GraphState = None) -> SolveTrace:
    """Graph projection splitting ADMM in the scaled variables of ``plan``."""
    cfg = cfg or SolverConfig()
    A = prob.A
    m, n = A.shape
    if plan.d_hat.d1.shape != (m,) or plan.d_hat.d2.shape != (n,):
        raise InvalidInputError("scaling plan does not match the problem shape")
    D, E = plan.D, plan.E
    cache = ProjectionCache(D[:, None] * A * E[None, :])
    D_inv = 1.0 / D
    st = state if state is not None else GraphState.zeros(m, n)
    trace = SolveTrace()
    sqrt_dim = np.sqrt(m + n)

    for k in range(1, cfg.max_iter + 1):
        st.x_t = prox_kernel(prob.g, E, st.x_p - st.u_x)
        st.y_t = prox_kernel(prob.f, D_inv, st.y_p - st.u_y)
        x_prev, y_prev = st.x_p, st.y_p
        st.x_p, st.y_p = graph_project(cache, st.x_t + st.u_x, st.y_t + st.u_y)
        dx, dy = st.x_t - st.x_p, st.y_t - st.y_p
        st.u_x += dx
        st.u_y += dy

        sx, sy = st.x_p - x_prev, st.y_p - y_prev
        r = np.sqrt(dx @ dx + dy @ dy)
        s = np.sqrt(sx @ sx + sy @ sy)
        z_t = np.sqrt(st.x_t @ st.x_t + st.y_t @ st.y_t)
        z_p = np.sqrt(st.x_p @ st.x_p + st.y_p @ st.y_p)
        u = np.sqrt(st.u_x @ st.u_x + st.u_y @ st.u_y)
        eps_pri = cfg.atol * sqrt_dim + cfg.tol * max(z_t, z_p)
        eps_dual = cfg.atol * sqrt_dim + cfg.tol * u

        x, y = E * st.x_t, st.y_t * D_inv
        trace.objective.append(prob.f(y) + prob.g(x))
        trace.r_primal.append(float(r))
        trace.r_dual.append(float(s))
        trace.eps_primal.append(float(eps_pri))
        trace.eps_dual.append(float(eps_dual))
        ex, ey = E * dx, dy * D_inv
        trace.r_primal_unscaled.append(float(np.sqrt(ex @ ex + ey @ ey)))
        ex, ey = E * sx, sy * D_inv
        trace.r_dual_unscaled.append(float(np.sqrt(ex @ ex + ey @ ey)))
        trace.step_history.append(plan.step)
        if cfg.record_iterates:
            trace.iterates.append((x.copy(), y.copy()))
        trace.iterations = k

        if r <= eps_pri and s <= eps_dual:
            trace.status = "converged"
            break

        if cfg.adaptive and trace.adaptations < cfg.max_adaptations:
            new_plan = adapt_step(plan, r, s, cfg.mu, cfg.tau)
            if new_plan is not plan:
                st.rescale(new_plan.alpha / plan.alpha)
                plan = new_plan
                D, E = plan.D, plan.E
                D_inv = 1.0 / D
                trace.adaptations += 1

    trace.x, trace.y = E * st.x_t, st.y_t / D
    trace.dual_x = -st.u_x / E
    trace.dual_y = -D * st.u_y
    trace.state = st
    trace.plan = plan
    trace.refactor_count = cache.refactor_count
    return trace


# --- parameter sweeps ---

@dataclass
class SweepCell:
    scaling: float  # alpha * beta
    step: float  # beta / alpha
    iterations: int
    status: str
    final_objective: float
    gamma: float
    is_min: bool = False

    @property
    def operator_norm(self) -> float:
        return self.scaling * self.gamma


def log_grid(lo, hi, steps) -> np.ndarray:
    if steps < 1 or lo <= 0 or hi <= 0:
        raise InvalidInputError("grid needs positive bounds and at least one step")
    return np.geomspace(lo, hi, steps) if steps > 1 else np.array([np.sqrt(lo * hi)])


def product_grid(scalings: Sequence[float], steps: Sequence[float]):
    return [(float(s), float(t)) for s in scalings for t in steps]


def _sweep_cell(args):
    prob, plan, cfg = args
    tr = solve_graph_form(prob, plan, cfg)
    return tr.iterations, tr.status, tr.final_objective


def worker_count(limit=None) -> int:
    env = os.environ.get("EQADMM_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    if limit is not None:
        n = min(n, limit)
    return max(1, n)


def sweep(prob: GraphFormProblem, plan_base: ScalingPlan, grid, cfg: SolverConfig = None,
          workers=None) -> List[SweepCell]:
    """Solve once per ``(alpha*beta, beta/alpha)`` grid point.

    Cells are independent; results come back in grid order whatever the pool
    size. Every cell attaining the minimum iteration count is flagged.
    """
    cfg = cfg or SolverConfig()
    grid = list(grid)
    if not grid:
        raise InvalidInputError("empty sweep grid")
    jobs = [(prob, plan_base.with_params(scaling=s, step=t), cfg) for s, t in grid]
    workers = worker_count(len(jobs)) if workers is None else max(1, min(workers, len(jobs)))
    if workers == 1:
        results = [_sweep_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    cells = [SweepCell(s, t, it, status, obj, plan_base.gamma)
             for (s, t), (it, status, obj) in zip(grid, results)]
    best = min(c.iterations for c in cells)
    for c in cells:
        c.is_min = c.iterations == best
    return cells
