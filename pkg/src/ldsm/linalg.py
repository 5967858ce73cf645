"""Dense symmetric linear algebra: eigensolver, SPD solves, powers, max norm.

Everything operates on float64 numpy arrays and is pure; tolerances are fixed
constants so downstream assertions stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConvergenceError, RejectedInputError, SingularMatrixError

SYMMETRY_TOL = 1e-12
JACOBI_OFF_TOL = 1e-12  # relative to the Frobenius norm of the input
JACOBI_MAX_SWEEPS = 100
SPD_PIVOT_TOL = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise RejectedInputError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise RejectedInputError(f"{name} contains non-finite entries")
    return m


def require_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise RejectedInputError(f"{name} must be square, got shape {m.shape}")
    return m


def require_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL, name: str = "matrix") -> np.ndarray:
    m = require_square(m, name)
    if m.size and max_norm(m - m.T) > tol:
        raise RejectedInputError(f"{name} is not symmetric within {tol:g}")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise RejectedInputError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def max_norm(m) -> float:
    """Largest absolute entry; 0 for empty matrices."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.max(np.abs(m))) if m.size else 0.0


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by decreasing magnitude with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eigen(m) -> Spectrum:
    """Full eigendecomposition of a symmetric matrix via cyclic Jacobi sweeps."""
    m = require_symmetric(m)
    n = m.shape[0]
    work = 0.5 * (m + m.T)  # exact symmetry for the rotation updates
    vecs = np.eye(n)
    off_tol = JACOBI_OFF_TOL * max(float(np.linalg.norm(work)), 1e-300)
    sweeps = _kernels.jacobi_eigh(work, vecs, off_tol, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise ConvergenceError(f"Jacobi sweeps did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    vals = np.diagonal(work).copy()
    order = np.argsort(-np.abs(vals), kind="stable")
    return Spectrum(eigenvalues=vals[order], eigenvectors=np.ascontiguousarray(vecs[:, order]))


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude of a symmetric matrix."""
    return float(np.abs(sym_eigen(m).eigenvalues[0]))


def mat_pow(m, k: int) -> np.ndarray:
    """k-th matrix power by repeated squaring; k=0 gives the identity."""
    m = require_square(m)
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise RejectedInputError(f"power must be a non-negative integer, got {k!r}")
    result = np.eye(m.shape[0])
    base = m.copy()
    k = int(k)
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def solve_spd(m, rhs) -> np.ndarray:
    """Solve m @ x = rhs for symmetric positive definite m via Cholesky.

    rhs may be a vector or a matrix of stacked right-hand sides. Raises
    SingularMatrixError carrying the failing pivot index when a pivot drops
    to SPD_PIVOT_TOL or below.
    """
    m = require_symmetric(m)
    b = np.asarray(rhs, dtype=np.float64)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != m.shape[0]:
        raise RejectedInputError(f"rhs shape {b.shape} does not match matrix {m.shape}")
    n = m.shape[0]
    lower = np.zeros((n, n))
    fail = _kernels.cholesky(m, lower, SPD_PIVOT_TOL)
    if fail >= 0:
        raise SingularMatrixError(f"matrix is not positive definite (pivot {fail})", pivot_index=int(fail))
    y = np.empty_like(b)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    x = np.empty_like(b)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x[:, 0] if vector else x
