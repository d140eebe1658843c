"""Condition metrics for dense matrices.

All functions take plain 2-D numpy arrays. The unsubscripted matrix norm is
always the spectral norm (largest singular value).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

#: sigma_min below this fraction of sigma_max is treated as singular.
SINGULAR_RTOL = 1e-12


class InvalidInputError(ValueError):
    """Matrix is malformed, zero, singular or otherwise outside a precondition."""


class DegenerateInputError(InvalidInputError):
    """Matrix has a zero row or column, so equilibration is undefined."""


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"expected a nonempty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


def singular_values(A) -> np.ndarray:
    """Singular values of ``A`` in descending order (LAPACK gesdd)."""
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def condition_number(A) -> float:
    """Ratio of largest to smallest singular value.

    Returns ``inf`` when the smallest singular value falls below
    ``SINGULAR_RTOL * sigma_max`` (this includes rank-deficient rectangular
    matrices).
    """
    s = singular_values(A)
    smax, smin = s[0], s[-1]
    if smax == 0.0:
        raise InvalidInputError("condition number of the zero matrix is undefined")
    if smin < SINGULAR_RTOL * smax:
        return np.inf
    return float(smax / smin)


def psi_metric(A) -> float:
    """``||A^{-1}||`` times the largest column 2-norm, for square invertible A."""
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError("psi is only defined for square matrices")
    s = singular_values(A)
    if s[0] == 0.0 or s[-1] < SINGULAR_RTOL * s[0]:
        raise InvalidInputError("psi is only defined for invertible matrices")
    return float(np.max(np.linalg.norm(A, axis=0)) / s[-1])


def row_norms(A, p=2) -> np.ndarray:
    return np.linalg.norm(A, ord=p, axis=1)


def col_norms(A, p=2) -> np.ndarray:
    return np.linalg.norm(A, ord=p, axis=0)


def row_col_ratios(A, p=2) -> Tuple[float, float]:
    """Max/min ratios of the row and of the column lp norms.

    ``p`` may be any real >= 1 or ``np.inf``.
    """
    A = as_matrix(A)
    if p < 1:
        raise InvalidInputError(f"norm order must be >= 1, got {p}")
    rn = row_norms(A, p)
    cn = col_norms(A, p)
    if rn.min() == 0.0 or cn.min() == 0.0:
        raise DegenerateInputError("matrix has a zero row or column")
    return float(rn.max() / rn.min()), float(cn.max() / cn.min())


def spectral_norm(A, tol=1e-10, max_iter=10_000) -> float:
    """Largest singular value by power iteration on ``A^T A``.

    The start vector is the all-ones vector plus a fixed deterministic
    perturbation, so repeated calls return identical results. Iteration stops
    once the eigen-residual ``||A^T A v - lam v||`` drops below ``tol * lam``.
    """
    A = as_matrix(A)
    n = A.shape[1]
    v = np.ones(n) + 0.01 * np.cos(np.arange(1, n + 1))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v lies in the null space; the start vector has every direction
            # with nonzero weight, so this only happens for A == 0
            if not np.any(A):
                raise InvalidInputError("spectral norm of the zero matrix requested")
            v = np.random.default_rng(0).standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        if np.linalg.norm(w - lam * v) <= tol * lam:
            break
        v = w / nw
    return float(np.sqrt(max(lam, 0.0)))


@dataclass(frozen=True)
class ConditionMetrics:
    sigma_max: float
    sigma_min: float
    kappa: float
    psi: Optional[float] = None


def condition_metrics(A) -> ConditionMetrics:
    A = as_matrix(A)
    s = singular_values(A)
    kappa = condition_number(A)
    psi = None
    if A.shape[0] == A.shape[1] and np.isfinite(kappa):
        psi = psi_metric(A)
    return ConditionMetrics(float(s[0]), float(s[-1]), kappa, psi)
