"""Dense matrix kernels used by the analysis layer.

Everything here is SVD- or eigendecomposition-based and meant for
desk-scale matrices (a few hundred rows at most); no sparse formats.
All functions are pure and safe to call concurrently.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotPSD, ZeroMatrix

#: Relative cutoff separating "zero" from "positive" singular values.
DEFAULT_RANK_TOL = 1e-10


def as_matrix(A):
    """Return ``A`` as a finite 2-d float array, validating the entries."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def pseudo_inverse(A):
    """Moore-Penrose pseudoinverse of a dense matrix.

    Defined for every matrix via the SVD.  For full-row-rank ``A`` this
    equals ``A.T @ inv(A @ A.T)``.
    """
    A = as_matrix(A)
    return np.linalg.pinv(A, rcond=DEFAULT_RANK_TOL)


@dataclass(frozen=True)
class SpectralSummary:
    """Singular values of a matrix together with its numerical rank.

    ``sigma_min_plus`` is the smallest singular value above the cutoff
    ``tol * sigma_max``; it is 0.0 for the zero matrix.
    """

    singular_values: np.ndarray
    rank: int
    sigma_min_plus: float


def spectral_summary(A, tol=DEFAULT_RANK_TOL):
    """Singular values (nonincreasing), numerical rank, and smallest
    positive singular value of ``A``.

    Rank counts values above ``tol * sigma_max``, which makes the cutoff
    invariant under rescaling of ``A``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = as_matrix(A)
    svals = np.linalg.svd(A, compute_uv=False)
    if svals.size == 0 or svals[0] <= 0.0:
        return SpectralSummary(svals, 0, 0.0)
    cutoff = tol * svals[0]
    rank = int(np.count_nonzero(svals > cutoff))
    sigma_min_plus = float(svals[rank - 1]) if rank > 0 else 0.0
    return SpectralSummary(svals, rank, sigma_min_plus)


def condition_number_plus(Q, tol=DEFAULT_RANK_TOL):
    """Restricted condition number lambda_max / lambda_min_plus of a
    symmetric PSD matrix, where lambda_min_plus is the smallest eigenvalue
    above ``tol * lambda_max``.

    Raises ``NotPSD`` for asymmetric input or a negative eigenvalue below
    ``-tol * lambda_max``, and ``ZeroMatrix`` when lambda_max <= tol.
    """
    Q = as_matrix(Q)
    if Q.shape[0] != Q.shape[1]:
        raise NotPSD(f"matrix is {Q.shape[0]}x{Q.shape[1]}, not square")
    scale = max(1.0, float(np.abs(Q).max()))
    if np.abs(Q - Q.T).max() > tol * scale:
        raise NotPSD("matrix is not symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    lam_max = float(eigs[-1])
    if lam_max <= tol:
        raise ZeroMatrix("largest eigenvalue is numerically zero")
    if eigs[0] < -tol * lam_max:
        raise NotPSD(f"negative eigenvalue {eigs[0]:.3e}")
    positive = eigs[eigs > tol * lam_max]
    lam_min_plus = float(positive[0])
    return lam_max / lam_min_plus


def lambda_max_psd(Q):
    """Largest eigenvalue of a symmetric PSD matrix (0.0 for Q = 0)."""
    Q = as_matrix(Q)
    if Q.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[-1])


def null_space_basis(A, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis (columns) of the null space of ``A``."""
    A = as_matrix(A)
    _, svals, vt = np.linalg.svd(A)
    cutoff = tol * svals[0] if svals.size and svals[0] > 0 else 0.0
    rank = int(np.count_nonzero(svals > cutoff))
    return vt[rank:].T


def row_space_basis(A, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis (rows) of the row space of ``A``."""
    A = as_matrix(A)
    _, svals, vt = np.linalg.svd(A)
    cutoff = tol * svals[0] if svals.size and svals[0] > 0 else 0.0
    rank = int(np.count_nonzero(svals > cutoff))
    return vt[:rank]
