"""Small dense linear-algebra kernels with fixed deterministic conventions.

Everything here is a thin, convention-pinning wrapper around LAPACK via
numpy: the optimizer needs reproducible factorizations (bit-identical
trajectories for identical inputs), which requires fixing the SVD sign
ambiguity and the square-root branch explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ThinSvd:
    """Thin SVD A = u @ diag(sigma) @ v.T of an (N, 2) matrix.

    u: (N, 2) with orthonormal columns; sigma: descending, >= 0; v: (2, 2)
    orthogonal. Signs are fixed so the factorization is deterministic: in each
    column of u the entry of largest magnitude (lowest index on ties) is
    non-negative.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.u @ np.diag(self.sigma) @ self.v.T


@dataclass
class SymEig:
    """Symmetric eigendecomposition with descending eigenvalues."""

    values: np.ndarray
    vectors: np.ndarray


def sym_eig(m: np.ndarray) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    _check_symmetric(m)
    values, vectors = np.linalg.eigh(m)
    return SymEig(values=values[::-1].copy(), vectors=vectors[:, ::-1].copy())


def _check_symmetric(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return m


def psd_sqrt(b: np.ndarray) -> np.ndarray:
    """Symmetric square root S of a PSD matrix, S @ S.T == b.

    Computed through the symmetric eigendecomposition with negative
    eigenvalues in [-1e-8, 0) clamped to zero; anything more negative raises.
    A triangular factorization would fail here because the inputs are
    typically exactly rank-deficient.
    """
    b = _check_symmetric(b)
    values, vectors = np.linalg.eigh(b)
    scale = max(1.0, float(values[-1]))
    if values[0] < -1e-8 * scale:
        raise ValueError(f"matrix is not PSD: min eigenvalue {values[0]:.3e}")
    # eigenvalues at rounding level are exact zeros of the rank-deficient
    # inputs this serves; truncating keeps the null space clean
    values = np.where(values < 1e-14 * max(float(values[-1]), 0.0), 0.0, values)
    root = np.sqrt(values)
    s = (vectors * root) @ vectors.T
    return 0.5 * (s + s.T)


def thin_svd(a: np.ndarray) -> ThinSvd:
    """Deterministic thin SVD of an (N, 2) matrix, N >= 2."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2 or a.shape[0] < 2:
        raise ValueError(f"expected an (N, 2) matrix with N >= 2, got shape {a.shape}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    for j in range(2):
        k = int(np.argmax(np.abs(u[:, j])))
        if u[k, j] < 0.0:
            u[:, j] = -u[:, j]
            vh[j, :] = -vh[j, :]
    return ThinSvd(u=u, sigma=s, v=vh.T)


def sym_eig_max(m: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix."""
    m = _check_symmetric(m)
    return float(np.linalg.eigvalsh(m)[-1])
