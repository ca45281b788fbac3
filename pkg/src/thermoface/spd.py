"""Symmetric positive-definite matrix kernels and covariance similarity measures.

Five measures are provided for comparing covariance matrices on the SPD
manifold: Cholesky-factor Frobenius distance, the affine-invariant
Riemannian metric, the log-Euclidean metric, (the square root of)
Jeffrey's symmetrized KL divergence, and the Jensen-Bregman log-det
divergence. All eigenvalue work uses symmetric decompositions so spectra
stay real and eigenvectors orthonormal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, NotPositiveDefinite

SYMMETRY_RTOL = 1e-10
MAX_CONDITION = 1e12


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, SpdMatrix):
        return X.values
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {A.shape}")
    return A


def _check_pair(X, Y) -> tuple[np.ndarray, np.ndarray]:
    A, B = _as_matrix(X), _as_matrix(Y)
    if A.shape != B.shape:
        raise DimMismatch(f"dims {A.shape[0]} vs {B.shape[0]}")
    return A, B


def ridge_scale(trace: float, dim: int) -> float:
    # relative scale for ridge repair; unit fallback keeps an all-zero
    # scatter repairable
    mean_eig = trace / dim
    return mean_eig if mean_eig > 0 else 1.0


@dataclass(frozen=True)
class SpdMatrix:
    """A validated SPD matrix.

    Construction checks symmetry (1e-10 relative) and positive
    definiteness. With ``repair=True`` a matrix that is not PD (or has
    condition number above 1e12) gets ``eps * I`` added, eps = 1e-6 of the
    mean eigenvalue; ``repaired`` records that this happened.
    """

    values: np.ndarray = field(repr=False)
    repaired: bool = False

    def __init__(self, values, repair: bool = False, ridge: float = 1e-6):
        A = _as_matrix(values).copy()
        scale = np.abs(A).max()
        if scale > 0 and np.abs(A - A.T).max() > SYMMETRY_RTOL * scale:
            raise NotPositiveDefinite("matrix is not symmetric")
        A = (A + A.T) / 2.0
        eigs = np.linalg.eigvalsh(A)
        lo, hi = eigs[0], eigs[-1]
        repaired = False
        if lo <= 0 or (lo > 0 and hi / lo > MAX_CONDITION):
            if not repair:
                raise NotPositiveDefinite(
                    f"minimum eigenvalue {lo:.3e} (condition {hi / lo if lo > 0 else np.inf:.3e})"
                )
            eps = ridge * ridge_scale(float(np.trace(A)), A.shape[0])
            A = A + eps * np.eye(A.shape[0])
            repaired = True
            if np.linalg.eigvalsh(A)[0] <= 0:
                raise NotPositiveDefinite("ridge repair failed")
        A.flags.writeable = False
        object.__setattr__(self, "values", A)
        object.__setattr__(self, "repaired", repaired)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _eigh_pd(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, U = np.linalg.eigh(A)
    if lam[0] <= 0:
        raise NotPositiveDefinite(f"minimum eigenvalue {lam[0]:.3e}")
    return lam, U


def cholesky_factor(X) -> np.ndarray:
    """Lower-triangular L with X = L @ L.T and positive diagonal."""
    A = _as_matrix(X)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky factorization failed") from None


def matrix_log(X) -> np.ndarray:
    """Principal matrix logarithm U @ diag(log l) @ U.T via eigh."""
    lam, U = _eigh_pd(_as_matrix(X))
    return (U * np.log(lam)) @ U.T


def matrix_exp(X) -> np.ndarray:
    """Matrix exponential of a symmetric matrix."""
    A = _as_matrix(X)
    lam, U = np.linalg.eigh((A + A.T) / 2.0)
    return (U * np.exp(lam)) @ U.T


def inv_sqrt(X) -> np.ndarray:
    """X**(-1/2): symmetric, and inv_sqrt(X) @ X @ inv_sqrt(X) == I."""
    lam, U = _eigh_pd(_as_matrix(X))
    return (U / np.sqrt(lam)) @ U.T


def _logdet(A: np.ndarray) -> float:
    L = cholesky_factor(A)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def dist_chol(X, Y) -> float:
    """||chol(X) - chol(Y)||_F."""
    A, B = _check_pair(X, Y)
    return float(np.linalg.norm(cholesky_factor(A) - cholesky_factor(B), "fro"))


def dist_airm(X, Y) -> float:
    """Affine-invariant Riemannian metric ||log(X^-1/2 Y X^-1/2)||_F."""
    A, B = _check_pair(X, Y)
    S = inv_sqrt(A)
    M = S @ B @ S
    lam, _ = _eigh_pd((M + M.T) / 2.0)
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def dist_lerm(X, Y) -> float:
    """Log-Euclidean metric ||log X - log Y||_F."""
    A, B = _check_pair(X, Y)
    return float(np.linalg.norm(matrix_log(A) - matrix_log(B), "fro"))


def dist_jkld(X, Y) -> float:
    """Root of Jeffrey's KL divergence, D^2 = tr(X^-1 Y + Y^-1 X - 2I) / 2.

    The square root keeps the value on the same distance-like scale as the
    other measures; it never changes a least-distance decision.
    """
    A, B = _check_pair(X, Y)
    _eigh_pd(A)
    _eigh_pd(B)
    d2 = 0.5 * (
        float(np.trace(np.linalg.solve(A, B)))
        + float(np.trace(np.linalg.solve(B, A)))
        - 2.0 * A.shape[0]
    )
    return float(np.sqrt(max(d2, 0.0)))


def dist_jbld(X, Y) -> float:
    """Jensen-Bregman log-det divergence log|X/2 + Y/2| - log|XY| / 2."""
    A, B = _check_pair(X, Y)
    d = _logdet((A + B) / 2.0) - 0.5 * (_logdet(A) + _logdet(B))
    return float(max(d, 0.0))


MEASURES = {
    "chol": dist_chol,
    "airm": dist_airm,
    "lerm": dist_lerm,
    "jkld": dist_jkld,
    "jbld": dist_jbld,
}


def distance(X, Y, measure: str = "jkld") -> float:
    """Dispatch to one of the five measures by name."""
    try:
        fn = MEASURES[measure]
    except KeyError:
        raise ValueError(f"unknown measure {measure!r}, expected one of {sorted(MEASURES)}") from None
    return fn(X, Y)
