"""Consensus ADMM with a diagonal preconditioner on the constraint.

Solves ``minimize (1/2)||Ax - b||^2 + g(z)  s.t.  F x = F z``. ``F = sqrt(rho) * 1``
is ordinary scalar-step ADMM; a general positive diagonal ``F`` changes the
norm used to augment the Lagrangian.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .equilibration import ruiz_symmetric
from .metrics import SINGULAR_RTOL, InvalidInputError, as_matrix, condition_number, singular_values
from .problems import SeparableFunction, prox_kernel


@dataclass
class ConsensusProblem:
    """Data for ``(1/2)||Ax - b||^2 + g(scale * z)`` with constraint ``F x = F z``.

    ``g_scale`` is a right preconditioner folded into ``g``; it defaults to
    ones.
    """

    A: np.ndarray
    b: np.ndarray
    g: SeparableFunction
    F: np.ndarray
    g_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        self.A = as_matrix(self.A)
        m, n = self.A.shape
        self.b = np.asarray(self.b, dtype=float)
        self.F = np.broadcast_to(np.asarray(self.F, dtype=float), (n,)).copy()
        self.g_scale = (np.ones(n) if self.g_scale is None
                        else np.broadcast_to(np.asarray(self.g_scale, dtype=float), (n,)).copy())
        if self.b.shape != (m,):
            raise InvalidInputError(f"b has shape {self.b.shape}, expected ({m},)")
        if np.any(self.F <= 0) or not np.all(np.isfinite(self.F)):
            raise InvalidInputError("F must be finite and positive")
        if np.any(self.g_scale <= 0):
            raise InvalidInputError("g_scale must be positive")

    def objective(self, x, z) -> float:
        r = self.A @ x - self.b
        return 0.5 * float(r @ r) + self.g(self.g_scale * z)

    def _fast_objective(self, G, Atb, bb):
        # (1/2)||Ax - b||^2 through the Gram matrix; n^2 instead of m n flops
        def obj(x, z):
            return 0.5 * float(x @ (G @ x)) - float(Atb @ x) + 0.5 * bb + self.g(self.g_scale * z)
        return obj


@dataclass
class ConsensusTrace:
    status: str = "max_iter"
    iterations: int = 0
    objective_history: List[float] = field(default_factory=list)
    residual_history: List[Tuple[float, float]] = field(default_factory=list)
    x_final: Optional[np.ndarray] = None
    z_final: Optional[np.ndarray] = None
    y_final: Optional[np.ndarray] = None
    x_history: list = field(default_factory=list)
    z_history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def solve_consensus(prob: ConsensusProblem, tol=1e-4, max_iter=100_000, atol=1e-9,
                    record_iterates=False) -> ConsensusTrace:
    """ADMM with Gauss-Seidel order x, z, dual; starts from zero.

    Stops when ``||F(x - z)|| <= eps_pri`` and ``||F^2 (z - z_prev)|| <= eps_dual``
    with ``eps_pri = atol sqrt(n) + tol max(||Fx||, ||Fz||)`` and
    ``eps_dual = atol sqrt(n) + tol ||F y||``. ``x_final`` is the last ``z``
    iterate, which lies in the domain of ``g``.
    """
    A, b, g, F, E = prob.A, prob.b, prob.g, prob.F, prob.g_scale
    n = A.shape[1]
    F2 = F * F
    G = A.T @ A
    K = G.copy()
    K[np.diag_indices_from(K)] += F2
    chol = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
    Atb = A.T @ b
    objective = prob._fast_objective(G, Atb, float(b @ b))
    x, z, y = np.zeros(n), np.zeros(n), np.zeros(n)
    trace = ConsensusTrace()
    sqrt_n = np.sqrt(n)
    prox_scale = E / F

    for k in range(1, max_iter + 1):
        x = scipy.linalg.cho_solve(chol, Atb + F2 * z - F * y, check_finite=False)
        z_prev = z
        # argmin g(E z) + (1/2) sum F_i^2 (z_i - v_i)^2 via u = F z
        z = prox_kernel(g, prox_scale, F * x + y) / F
        y = y + F * (x - z)

        r = np.linalg.norm(F * (x - z))
        s = np.linalg.norm(F2 * (z - z_prev))
        eps_pri = atol * sqrt_n + tol * max(np.linalg.norm(F * x), np.linalg.norm(F * z))
        eps_dual = atol * sqrt_n + tol * np.linalg.norm(F * y)
        trace.objective_history.append(objective(x, z))
        trace.residual_history.append((float(r), float(s)))
        if record_iterates:
            trace.x_history.append(x.copy())
            trace.z_history.append(z.copy())
        trace.iterations = k
        if r <= eps_pri and s <= eps_dual:
            trace.status = "converged"
            break

    trace.x_final, trace.z_final, trace.y_final = z, z, y
    return trace


def _full_column_rank(A):
    A = as_matrix(A)
    s = singular_values(A)
    if A.shape[0] < A.shape[1] or s[0] == 0.0 or s[-1] < SINGULAR_RTOL * s[0]:
        raise InvalidInputError("A must have full column rank")
    return A, s


def optimal_scalar_rho(A) -> float:
    """``sqrt(sigma_min(A) * sigma_max(A))``."""
    _, s = _full_column_rank(A)
    return float(np.sqrt(s[0] * s[-1]))


def gram_inverse(A) -> np.ndarray:
    A, _ = _full_column_rank(A)
    chol = scipy.linalg.cho_factor(A.T @ A, lower=True)
    P = scipy.linalg.cho_solve(chol, np.eye(A.shape[1]))
    return 0.5 * (P + P.T)


def equilibrate_gram_inverse(A, eps=1e-6, max_iter=200, p=2, return_report=False):
    """Diagonal ``F`` making rows (and columns) of ``F (A^T A)^{-1} F`` share one lp norm."""
    F, report = ruiz_symmetric(gram_inverse(A), p=p, eps=eps, max_iter=max_iter)
    return (F, report) if return_report else F


def convergence_rate_bound(A, F) -> float:
    """``kappa(diag(F) (A^T A)^{-1} diag(F))``."""
    P = gram_inverse(A)
    F = np.broadcast_to(np.asarray(F, dtype=float), (P.shape[0],))
    if np.any(F <= 0):
        raise InvalidInputError("F must be positive")
    return condition_number(F[:, None] * P * F[None, :])
