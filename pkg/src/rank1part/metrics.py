"""Partition quality metrics: NMI, matched clustering error, CCE, 1-D silhouette."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class CoPartition:
    z_R: np.ndarray
    z_C: np.ndarray

    @property
    def k_r(self) -> int:
        return int(np.max(self.z_R)) + 1

    @property
    def k_c(self) -> int:
        return int(np.max(self.z_C)) + 1


@dataclass
class RunReport:
    method: str
    config: str
    seed: int
    nmi_rows: float | None = None
    nmi_cols: float | None = None
    ce_rows: float | None = None
    ce_cols: float | None = None
    cce: float | None = None
    k_found: tuple = (None, None)
    wall_time: float = 0.0
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_found"] = list(self.k_found)
        return d


def _encode(z):
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValueError("labels must be 1-D")
    _, codes = np.unique(z, return_inverse=True)
    return codes.ravel()


def contingency(z, z_hat) -> np.ndarray:
    a, b = _encode(z), _encode(z_hat)
    if a.size != b.size:
        raise ValueError(f"label vectors differ in length ({a.size} vs {b.size})")
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def _entropy(counts, total):
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))


def nmi(z, z_hat) -> float:
    """Mutual information normalized by the arithmetic mean of the two entropies."""
    table = contingency(z, z_hat)
    total = table.sum()
    if total == 0:
        raise ValueError("empty label vectors")
    h_a = _entropy(table.sum(axis=1), total)
    h_b = _entropy(table.sum(axis=0), total)
    if h_a + h_b == 0.0:
        return 1.0
    pij = table / total
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / total**2
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(np.clip(mi / (0.5 * (h_a + h_b)), 0.0, 1.0))


def clustering_error(z, z_hat) -> float:
    """Fraction of points misassigned under the best one-to-one label matching."""
    table = contingency(z, z_hat)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=table.dtype)
    padded[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return 1.0 - padded[rows, cols].sum() / table.sum()


def cce(z_R, z_C, z_R_hat, z_C_hat) -> float:
    e_r = clustering_error(z_R, z_R_hat)
    e_c = clustering_error(z_C, z_C_hat)
    return e_r + e_c - e_r * e_c


def silhouette_1d(values, labels) -> float:
    """Mean silhouette with absolute difference as the distance.

    Points in singleton clusters score 0, as do points with ``a == b == 0``.
    """
    x = np.asarray(values, dtype=float)
    codes = _encode(labels)
    if codes.size != x.size:
        raise ValueError("values and labels differ in length")
    k = codes.max() + 1 if codes.size else 0
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")
    sizes = np.bincount(codes, minlength=k)
    onehot = np.zeros((x.size, k))
    onehot[np.arange(x.size), codes] = 1.0
    sums = np.abs(x[:, None] - x[None, :]) @ onehot
    own = sizes[codes]
    idx = np.arange(x.size)
    a = np.divide(sums[idx, codes], own - 1, out=np.zeros(x.size), where=own > 1)
    means = sums / sizes[None, :]
    means[idx, codes] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros(x.size), where=denom > 0)
    s[own == 1] = 0.0
    return float(s.mean())
