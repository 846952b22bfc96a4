"""Core matrix containers and the shared preprocessing steps.

Everything here is dense numpy; the problem sizes we care about (a few
hundred rows/columns) never justify sparse storage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ConvergenceError, DegenerateInputError

SK_TOL = 1e-9
SK_MAX_ITER = 10_000


@dataclass(frozen=True)
class DataMatrix:
    """A dense ``m x n`` data matrix with an optional observation mask.

    ``mask[i, j]`` is True when the entry is observed. Unobserved entries of
    ``values`` are stored as NaN.
    """

    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or min(values.shape) < 1:
            raise ValueError(f"data matrix must be 2-D and non-empty, got shape {values.shape}")
        mask = None
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool, copy=True)
            if mask.shape != values.shape:
                raise ValueError("mask shape does not match values")
            if mask.all():
                mask = None
            else:
                if not mask.any(axis=1).all() or not mask.any(axis=0).all():
                    raise ValueError("every row and column needs at least one observed entry")
                values[~mask] = np.nan
        observed = values if mask is None else values[mask]
        if not np.isfinite(observed).all():
            raise ValueError("observed values must be finite")
        values.setflags(write=False)
        if mask is not None:
            mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def fully_observed(self) -> bool:
        return self.mask is None

    @property
    def observed(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    @property
    def T(self) -> "DataMatrix":
        return DataMatrix(self.values.T, None if self.mask is None else self.mask.T)

    def require_full(self, what: str = "this operation") -> np.ndarray:
        if self.mask is not None:
            raise ValueError(f"{what} requires a fully observed matrix")
        return self.values

    def require_nonnegative(self, what: str = "this operation") -> None:
        obs = self.values[self.observed]
        if (obs < 0).any():
            raise ValueError(f"{what} requires nonnegative observed entries")


def as_data_matrix(A) -> DataMatrix:
    if isinstance(A, DataMatrix):
        return A
    values = np.asarray(A, dtype=float)
    if values.ndim == 2 and np.isnan(values).any():
        return DataMatrix(values, ~np.isnan(values))
    return DataMatrix(values)


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    sigma: float

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LaplacianMatrix:
    values: np.ndarray
    degrees: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]


def build_similarity(A, sigma: Optional[float] = None) -> SimilarityMatrix:
    """Gaussian kernel between the rows of ``A``.

    When ``sigma`` is not given it is set to the median of the nonzero
    pairwise Euclidean row distances.
    """
    X = as_data_matrix(A).require_full("build_similarity")
    m = X.shape[0]
    if m == 1:
        return SimilarityMatrix(np.ones((1, 1)), float(sigma) if sigma else 1.0)
    sq = pdist(X, "sqeuclidean")
    if sigma is None:
        dist = np.sqrt(sq)
        nonzero = dist[dist > 0]
        if nonzero.size == 0:
            raise DegenerateInputError("all rows are identical; the median bandwidth is zero")
        sigma = float(np.median(nonzero))
    elif not sigma > 0:
        raise ValueError("sigma must be positive")
    S = squareform(np.exp(-sq / (2.0 * sigma**2)))
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(S, float(sigma))


def normalized_laplacian(S) -> LaplacianMatrix:
    """``I - D^{-1/2} S D^{-1/2}`` with ``D`` the diagonal of row sums."""
    S = S.values if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=float)
    d = S.sum(axis=1)
    if not (d > 0).all():
        raise DegenerateInputError("similarity matrix has a zero row sum")
    inv_sqrt = 1.0 / np.sqrt(d)
    L = -(inv_sqrt[:, None] * S * inv_sqrt[None, :])
    L = 0.5 * (L + L.T)
    L[np.diag_indices_from(L)] += 1.0
    return LaplacianMatrix(L, d)


def sinkhorn_knopp_ds(S, tol: float = SK_TOL, max_iter: int = SK_MAX_ITER):
    """Scale a nonnegative square matrix to be doubly stochastic.

    Alternates row and column normalization. Returns ``(S_ds, r, c)`` with
    ``S_ds = diag(r) S diag(c)``.
    """
    S = S.values if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("sinkhorn_knopp_ds expects a square matrix")
    if (S < 0).any():
        raise ValueError("sinkhorn_knopp_ds expects nonnegative entries")
    if not (S.sum(axis=1) > 0).all() or not (S.sum(axis=0) > 0).all():
        raise DegenerateInputError("matrix has a zero row or column")
    m = S.shape[0]
    c = np.ones(m)
    residual = np.inf
    for it in range(1, max_iter + 1):
        r = 1.0 / (S @ c)
        c = 1.0 / (S.T @ r)
        # columns are exact after the c-update; rows carry the violation
        residual = np.abs(r * (S @ c) - 1.0).max()
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"Sinkhorn-Knopp did not converge in {max_iter} iterations (residual {residual:.3e})",
            residual=residual,
            n_iter=max_iter,
        )
    return r[:, None] * S * c[None, :], r, c


def column_stochastic(A) -> np.ndarray:
    """Divide every column of a nonnegative matrix by its sum."""
    X = as_data_matrix(A).require_full("column_stochastic")
    if (X < 0).any():
        raise ValueError("column_stochastic expects nonnegative entries")
    sums = X.sum(axis=0)
    if not (sums > 0).all():
        raise DegenerateInputError("matrix has a zero column")
    return X / sums[None, :]
