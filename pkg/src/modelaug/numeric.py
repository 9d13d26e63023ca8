"""Small dense linear-algebra kernel.

Matrices and vectors are plain float64 numpy arrays. Factorizations go
through LAPACK (scipy) but pivots are checked against our own tolerance so
that a near-singular system is reported the same way everywhere.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import FactorizationError, InputError

PIVOT_TOL = 1e-12


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite entries")
    return a


def as_vector(x, name="vector"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} has non-finite entries")
    return x


def matvec(A, x):
    A = as_matrix(A, "A")
    x = as_vector(x, "x")
    if A.shape[1] != x.shape[0]:
        raise InputError(f"cannot multiply {A.shape} matrix by length-{x.shape[0]} vector")
    return A @ x


def gram(A):
    """Return ``A.T @ A``, symmetrized exactly."""
    A = as_matrix(A, "A")
    if A.size == 0:
        raise InputError("gram of an empty matrix")
    G = A.T @ A
    return 0.5 * (G + G.T)


def cholesky(A):
    """Lower Cholesky factor of an SPD matrix.

    Raises FactorizationError when any pivot (squared diagonal of the factor)
    falls at or below ``PIVOT_TOL``.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got {A.shape}")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"matrix is not positive definite: {exc}") from None
    pivots = np.diag(L) ** 2
    if pivots.size and pivots.min() <= PIVOT_TOL:
        j = int(np.argmin(pivots))
        raise FactorizationError(f"non-positive pivot {pivots[j]:.3e} at index {j}")
    return L


def cho_solve(L, b):
    y = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, y, lower=False, check_finite=False)


def spd_solve(A, b):
    """Solve ``A x = b`` for symmetric positive-definite ``A``."""
    b = as_vector(b, "b")
    L = cholesky(A)
    if L.shape[0] != b.shape[0]:
        raise InputError(f"system of size {L.shape[0]} with length-{b.shape[0]} right-hand side")
    return cho_solve(L, b)


def least_squares(A, b):
    """Minimize ``||A x - b||`` through the normal equations.

    ``A`` must have full column rank; a rank-deficient ``A`` shows up as a
    FactorizationError from the Cholesky step.
    """
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != b.shape[0]:
        raise InputError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
    return spd_solve(gram(A), A.T @ b)
