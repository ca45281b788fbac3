"""Discriminant neighborhood embedding and a nearest-neighbor classifier.

Samples are columns of an n x N matrix. A signed k-NN graph puts +1 edges
between neighboring same-class samples and -1 edges between neighboring
different-class samples; the embedding minimizes

    phi(P) = sum_ij ||P^T x_i - P^T x_j||^2 F_ij
           = 2 tr(P^T X (S - F) X^T P),    P^T P = I,

whose minimizers under the orthonormality constraint are the eigenvectors
of X (S - F) X^T with negative eigenvalues. A plain PCA projection is
included as a baseline comparator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatch,
    DOutOfRange,
    EmptyTrainingSet,
    KOutOfRange,
    NoDiscriminantDirections,
    ShapeMismatch,
)

NEG_EIG_REL_TOL = 1e-10


@dataclass(frozen=True)
class LabeledDataset:
    """Columns of X are samples; labels holds one class id per column."""

    X: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=np.float64))
        labels = np.asarray(self.labels)
        if X.ndim != 2:
            raise ShapeMismatch(f"X must be 2-D, got shape {X.shape}")
        if labels.shape != (X.shape[1],):
            raise ShapeMismatch(
                f"{labels.shape[0] if labels.ndim else 0} labels for {X.shape[1]} samples"
            )
        if X.shape[1] < 2:
            raise ShapeMismatch("need at least 2 samples")
        if not np.all(np.isfinite(X)):
            raise ShapeMismatch("non-finite sample entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n_dims(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class AdjacencyF:
    """Signed neighborhood adjacency with entries in {-1, 0, +1}."""

    F: np.ndarray = field(repr=False)
    k: int


@dataclass(frozen=True)
class DneModel:
    """Learned n x d transformation with its negative-eigenvalue spectrum.

    ``n_nonnegative`` counts trailing columns that were forced in with
    eigenvalues >= 0 (only possible when the caller pins d).
    """

    P: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    k: int
    training_objective: float
    n_nonnegative: int = 0

    @property
    def n_dims(self) -> int:
        return self.P.shape[0]

    @property
    def d(self) -> int:
        return self.P.shape[1]


def knn_sets(X: np.ndarray, k: int) -> list[np.ndarray]:
    """Euclidean k nearest neighbors of each column, self excluded.

    Distance ties break toward the lower sample index.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    if not 1 <= k <= n - 1:
        raise KOutOfRange(f"k={k} outside 1..{n - 1}")
    sq = np.sum(X * X, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return [order[i, :k].copy() for i in range(n)]


def build_adjacency(X: np.ndarray, labels, k: int) -> AdjacencyF:
    """Signed adjacency: +1 for neighboring same-class pairs, -1 for
    neighboring different-class pairs, 0 elsewhere; symmetric, zero diagonal."""
    labels = np.asarray(labels)
    neighbors = knn_sets(X, k)
    n = len(neighbors)
    related = np.zeros((n, n), dtype=bool)
    for i, nbrs in enumerate(neighbors):
        related[i, nbrs] = True
    related |= related.T
    np.fill_diagonal(related, False)
    same = labels[:, None] == labels[None, :]
    F = np.where(related, np.where(same, 1, -1), 0).astype(np.int8)
    return AdjacencyF(F=F, k=k)


def degree_matrix(F) -> np.ndarray:
    """Diagonal matrix of column sums of F."""
    values = F.F if isinstance(F, AdjacencyF) else np.asarray(F)
    return np.diag(values.sum(axis=0).astype(np.float64))


def _fix_column_signs(P: np.ndarray) -> np.ndarray:
    # sign convention: largest-magnitude entry of each column is positive
    idx = np.argmax(np.abs(P), axis=0)
    signs = np.sign(P[idx, np.arange(P.shape[1])])
    signs[signs == 0] = 1.0
    return P * signs


def dne_fit(dataset: LabeledDataset, k: int, d: int | None = None) -> DneModel:
    """Fit the embedding from the negative-eigenvalue subspace of
    X (S - F) X^T.

    When ``d`` is omitted it defaults to the count of eigenvalues below
    -1e-10 * ||M||_F; zero such eigenvalues raises
    NoDiscriminantDirections. A pinned larger ``d`` is topped up with the
    next-smallest eigenvalues and the surplus is recorded.
    """
    X = dataset.X
    adj = build_adjacency(X, dataset.labels, k)
    S = degree_matrix(adj)
    M = X @ (S - adj.F) @ X.T
    M = (M + M.T) / 2.0
    lam, U = np.linalg.eigh(M)  # ascending

    tau = NEG_EIG_REL_TOL * np.linalg.norm(M, "fro")
    n_negative = int(np.sum(lam < -tau))
    if d is None:
        d = n_negative
        if d == 0:
            raise NoDiscriminantDirections("no negative eigenvalues in X(S-F)X^T")
    else:
        if not 1 <= d <= dataset.n_dims:
            raise DOutOfRange(f"d={d} outside 1..{dataset.n_dims}")

    P = _fix_column_signs(U[:, :d])
    eigenvalues = lam[:d].copy()
    objective = 2.0 * float(np.trace(P.T @ M @ P))
    return DneModel(
        P=P,
        eigenvalues=eigenvalues,
        k=k,
        training_objective=objective,
        n_nonnegative=max(0, d - n_negative),
    )


def objective_phi(dataset: LabeledDataset, F, P: np.ndarray) -> float:
    """The pairwise-sum objective sum_ij ||P^T x_i - P^T x_j||^2 F_ij.

    Evaluated directly from the embedded pairwise distances; serves as the
    independent cross-check of the trace form used by the fit.
    """
    values = F.F if isinstance(F, AdjacencyF) else np.asarray(F)
    P = np.asarray(P, dtype=np.float64)
    n = dataset.n_samples
    if P.ndim != 2 or P.shape[0] != dataset.n_dims or P.shape[1] < 1:
        raise ShapeMismatch(f"P shape {P.shape} incompatible with n={dataset.n_dims}")
    if values.shape != (n, n):
        raise ShapeMismatch(f"F shape {values.shape}, expected ({n}, {n})")
    Y = P.T @ dataset.X
    sq = np.sum(Y * Y, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Y.T @ Y)
    return float(np.sum(d2 * values))


def embed(model: DneModel, x_new: np.ndarray) -> np.ndarray:
    """Project a vector (or matrix of column samples) into the subspace."""
    x = np.asarray(x_new, dtype=np.float64)
    if x.shape[0] != model.n_dims:
        raise DimMismatch(f"input dimension {x.shape[0]}, model expects {model.n_dims}")
    return model.P.T @ x


def nn_classify(train_embedded: np.ndarray, labels, query_embedded: np.ndarray):
    """Label of the Euclidean-nearest training column; ties break toward
    the lower column index. Accepts a single query vector or a matrix of
    query columns."""
    T = np.asarray(train_embedded, dtype=np.float64)
    labels = np.asarray(labels)
    if T.ndim != 2 or T.shape[1] == 0:
        raise EmptyTrainingSet("no training columns")
    q = np.asarray(query_embedded, dtype=np.float64)
    single = q.ndim == 1
    Q = q[:, None] if single else q
    if Q.shape[0] != T.shape[0]:
        raise DimMismatch(f"query dimension {Q.shape[0]}, training {T.shape[0]}")
    d2 = np.sum(T * T, axis=0)[:, None] - 2.0 * (T.T @ Q) + np.sum(Q * Q, axis=0)[None, :]
    nearest = np.argmin(d2, axis=0)  # argmin takes the first minimum
    out = labels[nearest]
    return out[0] if single else out


def pca_fit(X: np.ndarray, d: int) -> np.ndarray:
    """Top-d eigenvectors of the mean-centered sample covariance
    (eigenvalue-descending, orthonormal columns)."""
    X = np.asarray(X, dtype=np.float64)
    n, N = X.shape
    if not 1 <= d <= min(n, N):
        raise DOutOfRange(f"d={d} outside 1..{min(n, N)}")
    Xc = X - X.mean(axis=1, keepdims=True)
    cov = (Xc @ Xc.T) / max(N - 1, 1)
    lam, U = np.linalg.eigh(cov)
    return _fix_column_signs(U[:, ::-1][:, :d])


def point_roles(X: np.ndarray, labels, k: int) -> list[str]:
    """Diagnostic per-sample role: 'inner' when all k neighbors share the
    sample's class, 'insular' when none do, 'marginal' otherwise."""
    labels = np.asarray(labels)
    roles = []
    for i, nbrs in enumerate(knn_sets(np.asarray(X, dtype=np.float64), k)):
        same = labels[nbrs] == labels[i]
        if same.all():
            roles.append("inner")
        elif not same.any():
            roles.append("insular")
        else:
            roles.append("marginal")
    return roles
