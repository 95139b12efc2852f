"""Deterministic matrix primitives.

Seeded sampling (Gaussian, Haar-orthogonal), the discrete Lyapunov solver,
the Moore-Penrose pseudoinverse, and the norm bundle used by the complexity
measures. All functions are pure: they read their ``SeededRng`` argument and
arrays, and return new arrays.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import UnstableSystemError
from .rng import SeededRng

__all__ = [
    "MatrixNorms",
    "as_matrix",
    "spectral_radius",
    "sample_gaussian",
    "sample_semi_orthogonal",
    "sample_haar_orthogonal_partition",
    "solve_discrete_lyapunov",
    "pseudoinverse",
    "norms",
]

# Dense Kronecker solve is O(n^6); past this size fall back to fixed-point
# iteration of the recursion itself.
_KRON_MAX_DIM = 30

# Singular values below CUTOFF * sigma_max are treated as zero rank.
_PINV_RCOND = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a 2-D float64 array with finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def spectral_radius(m: np.ndarray) -> float:
    """Largest eigenvalue magnitude."""
    return float(np.abs(np.linalg.eigvals(m)).max())


def sample_gaussian(rng: SeededRng, rows: int, cols: int, std: float) -> np.ndarray:
    """i.i.d. zero-mean Gaussian entries with the given standard deviation."""
    if std < 0:
        raise ValueError(f"std must be nonnegative, got {std}")
    return std * rng.standard_normal(rows, cols)


def sample_semi_orthogonal(rng: SeededRng, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
    """Haar-distributed matrix with orthonormal columns, times ``scale``.

    QR of a standard Gaussian matrix, with the sign convention that the
    triangular factor has nonnegative diagonal; this yields exact Haar
    measure on the set of ``rows x cols`` matrices with W^T W = I.
    Requires ``rows >= cols``.
    """
    if rows < cols:
        raise ValueError(
            f"semi-orthogonal sample needs rows >= cols, got {rows}x{cols}"
        )
    g = rng.standard_normal(rows, cols)
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return scale * (q * signs)


def sample_haar_orthogonal_partition(
    rng: SeededRng, p: int, n: int, m: int
) -> list[np.ndarray]:
    """Column blocks W_1..W_m (each p x n) of one Haar sample from O(p).

    The blocks satisfy W_i^T W_i = I_n and W_i^T W_j = 0 for i != j.
    Requires ``n`` to divide ``p`` and ``1 <= m <= p / n``.
    """
    if p % n != 0:
        raise ValueError(f"n={n} must divide p={p}")
    if not 1 <= m <= p // n:
        raise ValueError(f"m={m} out of range [1, {p // n}] for p={p}, n={n}")
    w = sample_semi_orthogonal(rng, p, p)
    return [w[:, i * n : (i + 1) * n].copy() for i in range(m)]


class _DlyapFactor:
    """LU factorization of the vectorized discrete Lyapunov operator.

    Factoring ``I - Acl^T (x) Acl^T`` once serves both equation
    orientations: ``solve`` gives P = Rhs + Acl^T P Acl, and
    ``solve_adjoint`` gives S = Rhs + Acl S Acl^T (the transposed system).
    """

    def __init__(self, acl: np.ndarray):
        n = acl.shape[0]
        self.n = n
        op = np.eye(n * n) - np.kron(acl.T, acl.T)
        self.lu = lu_factor(op, check_finite=False)

    def _solve(self, rhs: np.ndarray, trans: int) -> np.ndarray:
        n = self.n
        p = lu_solve(self.lu, rhs.ravel(), trans=trans, check_finite=False)
        p = p.reshape(n, n)
        return 0.5 * (p + p.T)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._solve(rhs, trans=0)

    def solve_adjoint(self, rhs: np.ndarray) -> np.ndarray:
        return self._solve(rhs, trans=1)


def _dlyap_fixed_point(acl: np.ndarray, rhs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    p = rhs.copy()
    for _ in range(500_000):
        p_next = rhs + acl.T @ p @ acl
        if np.linalg.norm(p_next - p, "fro") < tol:
            return 0.5 * (p_next + p_next.T)
        p = p_next
    raise RuntimeError("fixed-point Lyapunov iteration did not converge")


def solve_discrete_lyapunov(acl, rhs) -> np.ndarray:
    """Solve P = Rhs + Acl^T P Acl for symmetric P.

    Solves the vectorized n^2 x n^2 linear system
    ``[I - Acl^T (x) Acl^T] vec(P) = vec(Rhs)`` directly for n <= 30 and by
    fixed-point iteration of the recursion for larger n. Requires the
    spectral radius of ``Acl`` to be < 1; otherwise the series defining P
    diverges and :class:`UnstableSystemError` is raised.
    """
    acl = as_matrix(acl, "Acl")
    rhs = as_matrix(rhs, "Rhs")
    n = acl.shape[0]
    if acl.shape[1] != n:
        raise ValueError(f"Acl must be square, got {acl.shape}")
    if rhs.shape != (n, n):
        raise ValueError(f"Rhs must be {n}x{n}, got {rhs.shape}")
    rho = spectral_radius(acl)
    if rho >= 1.0:
        raise UnstableSystemError(f"spectral radius {rho:.6f} >= 1")
    if n <= _KRON_MAX_DIM:
        p = _DlyapFactor(acl).solve(rhs)
    else:
        p = _dlyap_fixed_point(acl, rhs)
    residual = np.linalg.norm(p - rhs - acl.T @ p @ acl, "fro")
    if residual > 1e-8 * (1.0 + np.linalg.norm(p, "fro")):
        raise RuntimeError(
            f"Lyapunov solve residual {residual:.3e} exceeds tolerance "
            f"(spectral radius {rho:.6f}; system may be too ill-conditioned)"
        )
    return p


def pseudoinverse(z) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``1e-12 * sigma_max`` are treated as zero when
    deciding rank.
    """
    z = as_matrix(z, "Z")
    return np.linalg.pinv(z, rcond=_PINV_RCOND)


class MatrixNorms(NamedTuple):
    spectral: float
    frobenius: float
    nuclear: float
    entrywise_l1: float


def norms(m) -> MatrixNorms:
    """Spectral, Frobenius, nuclear, and entrywise-L1 norms of a matrix."""
    m = as_matrix(m, "matrix")
    sv = np.linalg.svd(m, compute_uv=False)
    return MatrixNorms(
        spectral=float(sv[0]),
        frobenius=float(np.linalg.norm(m, "fro")),
        nuclear=float(sv.sum()),
        entrywise_l1=float(np.abs(m).sum()),
    )
