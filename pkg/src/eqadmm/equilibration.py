"""Diagonal equilibration: Sinkhorn-Knopp, Ruiz, and column-equalization bounds.

Both algorithms look for positive vectors ``d1``, ``d2`` such that every row
of ``B = diag(d1) A diag(d2)`` has the same lp norm and every column has the
same lp norm. Stopping uses ``r - 1 <= eps`` on the max/min norm ratios.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .metrics import (
    SINGULAR_RTOL,
    DegenerateInputError,
    InvalidInputError,
    as_matrix,
    col_norms,
    condition_number,
    psi_metric,
    row_col_ratios,
    row_norms,
    singular_values,
)

D_MIN, D_MAX = 1e-30, 1e30


class DivergenceError(ArithmeticError):
    """A scaling entry left [1e-30, 1e30]; the matrix is structurally unbalanced."""


@dataclass(frozen=True)
class DiagonalScaling:
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        for name in ("d1", "d2"):
            d = np.asarray(getattr(self, name), dtype=float)
            if d.ndim != 1 or not np.all(np.isfinite(d)) or np.any(d <= 0):
                raise InvalidInputError(f"{name} must be a finite positive vector")
            object.__setattr__(self, name, d)

    @classmethod
    def identity(cls, m, n):
        return cls(np.ones(m), np.ones(n))

    def apply(self, A) -> np.ndarray:
        """Return ``diag(d1) @ A @ diag(d2)``."""
        return self.d1[:, None] * A * self.d2[None, :]

    def scaled(self, alpha, beta) -> "DiagonalScaling":
        return DiagonalScaling(alpha * self.d1, beta * self.d2)


@dataclass
class EquilibrationReport:
    iterations: int = 0
    r1_history: List[float] = field(default_factory=list)
    r2_history: List[float] = field(default_factory=list)
    kappa_before: Optional[float] = None
    kappa_after: Optional[float] = None
    converged: bool = False

    @property
    def r1(self):
        return self.r1_history[-1] if self.r1_history else None

    @property
    def r2(self):
        return self.r2_history[-1] if self.r2_history else None


def _check_input(A, p):
    A = as_matrix(A)
    if p < 1:
        raise InvalidInputError(f"norm order must be >= 1, got {p}")
    r1, r2 = row_col_ratios(A, p)  # raises on zero rows/columns
    return A, r1, r2


def _guard(*ds):
    for d in ds:
        if not np.all(np.isfinite(d)) or d.min() < D_MIN or d.max() > D_MAX:
            raise DivergenceError("scaling diverged; matrix may lack total support")


def _finish(A, d1, d2, report, compute_kappa):
    scaling = DiagonalScaling(d1, d2)
    if compute_kappa:
        report.kappa_before = condition_number(A)
        report.kappa_after = condition_number(scaling.apply(A))
    return scaling, report


def sinkhorn_knopp(A, p=2, eps=1e-6, max_iter=100, compute_kappa=True):
    """Sinkhorn-Knopp equilibration in the lp norm.

    The alternating reciprocal updates run on the nonnegative matrix
    ``N = |A|**p``; the returned scaling is the ``1/p`` power of the
    N-scaling, so row and column sums of ``|B|**p`` become equal.
    """
    A, r1, r2 = _check_input(A, p)
    if not np.isfinite(p):
        raise InvalidInputError("Sinkhorn-Knopp needs a finite norm order")
    m, n = A.shape
    N = np.abs(A) ** p
    u, v = np.ones(m), np.ones(n)
    d1, d2 = np.ones(m), np.ones(n)
    report = EquilibrationReport()
    report.converged = r1 - 1 <= eps and r2 - 1 <= eps
    while not report.converged and report.iterations < max_iter:
        u = 1.0 / (N @ v)
        v = 1.0 / (N.T @ u)
        d1, d2 = u ** (1.0 / p), v ** (1.0 / p)
        _guard(d1, d2)
        B = d1[:, None] * A * d2[None, :]
        r1, r2 = row_col_ratios(B, p)
        report.iterations += 1
        report.r1_history.append(r1)
        report.r2_history.append(r2)
        report.converged = r1 - 1 <= eps and r2 - 1 <= eps
    return _finish(A, d1, d2, report, compute_kappa)


def ruiz(A, p=2, eps=1e-6, max_iter=100, compute_kappa=True):
    """Ruiz equilibration with the rectangular column correction.

    Both updates use the same ``B`` from the previous pass. At the fixed
    point rows have unit lp norm and columns have norm ``(m/n)**(1/p)``.
    """
    A, r1, r2 = _check_input(A, p)
    m, n = A.shape
    col_fix = (m / n) ** (0.5 / p) if np.isfinite(p) else 1.0
    d1, d2 = np.ones(m), np.ones(n)
    B = A
    report = EquilibrationReport()
    report.converged = r1 - 1 <= eps and r2 - 1 <= eps
    while not report.converged and report.iterations < max_iter:
        rn, cn = row_norms(B, p), col_norms(B, p)
        d1 = d1 / np.sqrt(rn)
        d2 = d2 * col_fix / np.sqrt(cn)
        _guard(d1, d2)
        B = d1[:, None] * A * d2[None, :]
        r1, r2 = row_col_ratios(B, p)
        report.iterations += 1
        report.r1_history.append(r1)
        report.r2_history.append(r2)
        report.converged = r1 - 1 <= eps and r2 - 1 <= eps
    return _finish(A, d1, d2, report, compute_kappa)


def ruiz_symmetric(P, p=2, eps=1e-6, max_iter=100):
    """Symmetric Ruiz: one vector ``d`` so that rows of ``diag(d) P diag(d)``
    share a common lp norm (columns follow by symmetry).

    Returns ``(d, report)``; ``r2_history`` mirrors ``r1_history``.
    """
    P = as_matrix(P)
    if P.shape[0] != P.shape[1] or not np.allclose(P, P.T, rtol=1e-10, atol=0):
        raise InvalidInputError("symmetric equilibration needs a symmetric matrix")
    rn = row_norms(P, p)
    if rn.min() == 0.0:
        raise DegenerateInputError("matrix has a zero row")
    d = np.ones(P.shape[0])
    report = EquilibrationReport()
    r = rn.max() / rn.min()
    report.converged = r - 1 <= eps
    while not report.converged and report.iterations < max_iter:
        d = d / np.sqrt(rn)
        _guard(d)
        rn = row_norms(d[:, None] * P * d[None, :], p)
        r = float(rn.max() / rn.min())
        report.iterations += 1
        report.r1_history.append(r)
        report.r2_history.append(r)
        report.converged = r - 1 <= eps
    return d, report


def equilibration_residual(A, scaling: DiagonalScaling, p=2) -> float:
    """Scale-free stationarity residual of the log-domain convex formulation.

    With ``x = p log d1`` and ``y = p log d2`` the objective is the entry sum
    of ``|B|**p``; its gradient projected onto the zero-sum constraints is the
    deviation of row (column) sums from their mean. Returns the largest such
    deviation relative to the mean.
    """
    A = as_matrix(A)
    W = np.abs(scaling.apply(A)) ** p
    rs, cs = W.sum(axis=1), W.sum(axis=0)
    return float(max(np.max(np.abs(rs - rs.mean())) / rs.mean(),
                     np.max(np.abs(cs - cs.mean())) / cs.mean()))


# --- column equalization is near-optimal over right scalings ---

BOUND_ATOL = 1e-9


def column_equalizer(A) -> np.ndarray:
    """``1 / ||A_j||_2``: right scaling that gives ``A diag(d)`` equal column norms."""
    cn = col_norms(as_matrix(A), 2)
    if cn.min() == 0.0:
        raise DegenerateInputError("matrix has a zero column")
    return 1.0 / cn


@dataclass
class BoundCheck:
    name: str
    holds: bool
    worst_slack: float  # min over samples of (bound - value); negative = violated
    samples: int


def random_diagonals(n, count, rng, decades=2.0) -> np.ndarray:
    """``count`` positive diagonals, log-uniform over ``10**[-decades, decades]``."""
    return 10.0 ** rng.uniform(-decades, decades, size=(count, n))


def check_psi_optimality(A, diagonals: Sequence[np.ndarray]) -> BoundCheck:
    """psi(A Dhat) <= psi(A D) for every sampled D."""
    A = as_matrix(A)
    best = psi_metric(A * column_equalizer(A))
    slack = min(psi_metric(A * d) + BOUND_ATOL - best for d in diagonals)
    return BoundCheck("psi_optimality", slack >= 0, float(slack), len(diagonals))


def check_kappa_sqrt_n(A, diagonals: Sequence[np.ndarray]) -> BoundCheck:
    """kappa(A Dhat) <= sqrt(n) kappa(A D) for every sampled D."""
    A = as_matrix(A)
    n = A.shape[1]
    k_hat = condition_number(A * column_equalizer(A))
    slack = min(np.sqrt(n) * condition_number(A * d) + BOUND_ATOL - k_hat
                for d in diagonals)
    return BoundCheck("kappa_sqrt_n", slack >= 0, float(slack), len(diagonals))


def check_spd_bound(P, diagonals: Sequence[np.ndarray], identity_rtol=1e-6) -> BoundCheck:
    """kappa(Dhat P Dhat) <= n kappa(D P D) with ``dhat_j = P_jj**-0.5``.

    Also checks ``kappa(D P D) == kappa(A D)**2`` for the Cholesky factor
    ``P = A^T A``; a mismatch counts as a failure. The smallest singular value
    of ``D P D`` carries a relative error near ``eps_mach * kappa``, so the
    identity tolerance widens accordingly.
    """
    P = as_matrix(P)
    n = P.shape[0]
    A = np.linalg.cholesky(P).T
    d_hat = 1.0 / np.sqrt(np.diag(P))
    k_hat = condition_number(d_hat[:, None] * P * d_hat[None, :])
    slack = np.inf
    identity_ok = True
    for d in diagonals:
        k = condition_number(d[:, None] * P * d[None, :])
        rtol = max(identity_rtol, 100 * np.finfo(float).eps * k)
        identity_ok &= bool(np.isclose(k, condition_number(A * d) ** 2, rtol=rtol))
        slack = min(slack, n * k + BOUND_ATOL - k_hat)
    return BoundCheck("spd_n_bound", bool(slack >= 0 and identity_ok), float(slack),
                         len(diagonals))


def is_near_singular(A) -> bool:
    s = singular_values(A)
    return bool(s[0] == 0.0 or s[-1] < 10 * SINGULAR_RTOL * s[0])


def verify_scaling_bounds(n, rng, n_diagonals=100):
    """Run the three checks on one random Gaussian instance of size ``n``.

    Returns ``(checks, A, P)``; ``checks`` is empty when ``A`` is too close to
    singular for the metrics to be meaningful.
    """
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, n))
    P = B.T @ B
    if is_near_singular(A) or is_near_singular(P):
        return [], A, P
    diags = random_diagonals(n, n_diagonals, rng)
    checks = [check_psi_optimality(A, diags), check_kappa_sqrt_n(A, diags),
              check_spd_bound(P, diags)]
    return checks, A, P
