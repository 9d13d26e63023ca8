"""Sparse (OMP), dense (ridge) and fused representations over a dictionary."""

from dataclasses import dataclass, field

import numpy as np

from .errors import FactorizationError, InputError
from .numeric import as_matrix, as_vector, cho_solve, cholesky, gram, least_squares

RESIDUAL_TOL = 1e-10
CORRELATION_TOL = 1e-12

FUSION_NORMS = ("l2", "l1", "max-abs")


def _columns(d):
    cols = getattr(d, "columns", d)
    return as_matrix(cols, "dictionary")


@dataclass(frozen=True)
class SparseCode:
    """OMP output.

    ``status`` records why the loop stopped: ``"sparsity"`` (k columns
    chosen), ``"residual"``, ``"correlation"`` or ``"dependent"`` (the next
    column was numerically in the span of the support, which is kept as it
    was).
    """

    support: tuple
    coefficients: np.ndarray
    ambient_len: int
    residual_norm: float
    residual_trace: tuple = field(default=(), repr=False)
    status: str = "sparsity"

    def expand(self):
        out = np.zeros(self.ambient_len)
        if self.support:
            out[list(self.support)] = self.coefficients
        return out


@dataclass(frozen=True)
class DenseCode:
    coefficients: np.ndarray


@dataclass(frozen=True)
class FusedCode:
    coefficients: np.ndarray


def omp_encode(d, s, k):
    """Orthogonal matching pursuit with a full least-squares refit per step.

    Selection takes the column with the largest absolute correlation with
    the residual (lowest index on ties); columns already in the support are
    excluded.
    """
    D = _columns(d)
    s = as_vector(s, "s")
    m, n = D.shape
    if s.shape[0] != m:
        raise InputError(f"sample has length {s.shape[0]}, dictionary rows are {m}")
    if not 0 <= k <= n:
        raise InputError(f"sparsity k={k} outside [0, {n}]")

    residual = s.copy()
    rnorm = float(np.linalg.norm(residual))
    trace = [rnorm]
    support = []
    coef = np.zeros(0)
    available = np.ones(n, dtype=bool)
    status = "sparsity"

    while len(support) < k:
        if rnorm <= RESIDUAL_TOL:
            status = "residual"
            break
        corr = np.abs(D.T @ residual)
        corr[~available] = -np.inf
        j = int(np.argmax(corr))
        if corr[j] <= CORRELATION_TOL:
            status = "correlation"
            break
        trial = support + [j]
        try:
            trial_coef = least_squares(D[:, trial], s)
        except FactorizationError:
            status = "dependent"
            break
        support, coef = trial, trial_coef
        available[j] = False
        residual = s - D[:, support] @ coef
        rnorm = float(np.linalg.norm(residual))
        trace.append(rnorm)

    return SparseCode(tuple(support), coef, n, rnorm, tuple(trace), status)


class DenseCoder:
    """Ridge coder with the factorization of ``D.T D + lam I`` cached.

    Encoding many samples against one dictionary only pays for the
    Cholesky factorization once.
    """

    def __init__(self, d, lam):
        if not lam > 0:
            raise InputError(f"ridge weight must be positive, got {lam}")
        self.D = _columns(d)
        self.lam = float(lam)
        A = gram(self.D)
        A[np.diag_indices_from(A)] += self.lam
        self._L = cholesky(A)

    def __call__(self, s):
        s = as_vector(s, "s")
        if s.shape[0] != self.D.shape[0]:
            raise InputError(f"sample has length {s.shape[0]}, dictionary rows are {self.D.shape[0]}")
        return DenseCode(cho_solve(self._L, self.D.T @ s))


def dense_encode(d, s, lam):
    """Collaborative representation ``(D.T D + lam I)^-1 D.T s``."""
    return DenseCoder(d, lam)(s)


def normalize(v, norm="l2"):
    """Scale ``v`` to unit norm; the zero vector stays zero."""
    if norm == "l2":
        size = np.linalg.norm(v)
    elif norm == "l1":
        size = np.abs(v).sum()
    elif norm == "max-abs":
        size = np.abs(v).max() if v.size else 0.0
    else:
        raise InputError(f"unknown fusion norm {norm!r}; choose from {FUSION_NORMS}")
    if size == 0:
        return np.zeros_like(v)
    return v / size


def fuse(sparse, dense, norm="l2"):
    a = sparse.expand() if isinstance(sparse, SparseCode) else as_vector(sparse, "sparse")
    b = dense.coefficients if isinstance(dense, DenseCode) else as_vector(dense, "dense")
    if a.shape != b.shape:
        raise InputError(f"sparse code length {a.shape[0]} != dense code length {b.shape[0]}")
    return FusedCode(normalize(a, norm) + normalize(b, norm))
