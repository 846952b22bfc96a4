"""Step 2: exact l_p-Potts denoising and label extraction.

The solver is the classic O(n^2) dynamic program over the start of the last
segment. Single-segment costs are computed once per signal, so sweeping the
jump penalty only re-runs the (cheap) recursion.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import SelectionError
from .metrics import silhouette_1d

VALUE_TOL = 1e-12
GRID_SIZE = 20
GRID_SPAN = (1e-3, 10.0)
SILHOUETTE_DROP = 0.01
MIN_CANDIDATES = 3


@dataclass(frozen=True)
class SortPermutation:
    perm: np.ndarray
    inverse: np.ndarray

    @classmethod
    def of(cls, u) -> "SortPermutation":
        perm = np.argsort(np.asarray(u), kind="stable")
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        return cls(perm, inverse)


@dataclass
class PiecewiseResult:
    """Output of a Potts solve.

    ``boundaries`` holds the start index of every segment but the first
    (equivalently the 1-based last index before each jump). For sorted-Potts
    results the boundaries and segment values describe the *sorted* signal
    ``x[order.perm]``; ``x`` itself is returned in the original order.
    """

    x: np.ndarray
    boundaries: list
    segment_values: list
    objective: float
    lam: float
    p: int
    order: Optional[SortPermutation] = field(default=None, repr=False)

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) + 1

    def segments(self):
        edges = [0, *self.boundaries, self.x.size]
        return list(zip(edges[:-1], edges[1:]))


def _check(u, lam, p):
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("signal must be a non-empty 1-D array")
    if not np.isfinite(u).all():
        raise ValueError("signal must be finite")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    return u


# ---------------------------------------------------------------------------
# single-segment costs; row j of the returned matrix holds cost(i..j) for i <= j


def _costs_l2(u):
    n = u.size
    ET = np.full((n, n), np.inf)
    for i in range(n):
        d = u[i:] - u[i]
        length = np.arange(1, n - i + 1)
        c1 = np.cumsum(d)
        ET[i:, i] = np.maximum(np.cumsum(d * d) - c1 * c1 / length, 0.0)
    return ET


def _costs_l1_sorted(s):
    n = s.size
    ET = np.full((n, n), np.inf)
    for i in range(n):
        d = s[i:] - s[i]
        P = np.concatenate(([0.0], np.cumsum(d)))
        length = np.arange(1, n - i + 1)
        k = (length - 1) // 2
        med = d[k]
        cost = med * k - P[k] + (P[length] - P[k + 1]) - med * (length - k - 1)
        ET[i:, i] = np.maximum(cost, 0.0)
    return ET


def _costs_l1(u):
    if np.all(np.diff(u) >= 0):
        return _costs_l1_sorted(u)
    n = u.size
    ET = np.full((n, n), np.inf)
    for i in range(n):
        base = u[i]
        window = []
        low = 0.0  # sum of window[0..k], k = lower-median index
        total = 0.0
        col = ET[:, i]
        for j in range(i, n):
            x = u[j] - base
            size = len(window)
            k = (size - 1) // 2
            pos = bisect.bisect_right(window, x)
            window.insert(pos, x)
            total += x
            k_new = size // 2
            if size == 0:
                low = x
            elif pos <= k:
                low += x if k_new == k + 1 else x - window[k + 1]
            elif k_new == k + 1:
                low += window[k + 1]
            med = window[k_new]
            length = size + 1
            cost = med * (k_new + 1) - low + (total - low) - med * (length - k_new - 1)
            col[j] = cost if cost > 0.0 else 0.0
    return ET


def segment_costs(u, p):
    u = np.asarray(u, dtype=float)
    return _costs_l2(u) if p == 2 else _costs_l1(u)


def segment_value(seg, p):
    if p == 2:
        return float(np.mean(seg))
    return float(np.sort(seg)[(seg.size - 1) // 2])


# ---------------------------------------------------------------------------
# dynamic program


TIE_RTOL = 1e-12


def _dp_boundaries(ET, lam):
    n = ET.shape[0]
    best = np.empty(n + 1)
    best[0] = -lam
    nseg = np.zeros(n + 1, dtype=int)
    bnd = [()] * (n + 1)
    for j in range(n):
        cand = best[: j + 1] + lam + ET[j, : j + 1]
        i = int(np.argmin(cand))
        top = cand[i]
        # summation order alone can split an exact tie, so compare within a relative band
        ties = np.flatnonzero(cand <= top + TIE_RTOL * (abs(top) + lam))
        if ties.size > 1:
            # fewer segments first, then the lexicographically smallest boundary list
            fewest = nseg[ties].min()
            ties = [t for t in ties if nseg[t] == fewest]
            i = min(ties, key=lambda t: bnd[t] + ((t,) if t > 0 else ()))
        best[j + 1] = cand[i]
        nseg[j + 1] = nseg[i] + 1
        bnd[j + 1] = bnd[i] + ((i,) if i > 0 else ())
    return list(bnd[n])


def _assemble(u, boundaries, lam, p):
    edges = [0, *boundaries, u.size]
    values = [segment_value(u[a:b], p) for a, b in zip(edges[:-1], edges[1:])]
    # adjacent equal values would be an invisible jump; fold them
    merged = True
    while merged:
        merged = False
        for k in range(len(values) - 1):
            if values[k] == values[k + 1]:
                del edges[k + 1]
                a, b = edges[k], edges[k + 1]
                values[k : k + 2] = [segment_value(u[a:b], p)]
                merged = True
                break
    x = np.repeat(values, np.diff(edges))
    boundaries = edges[1:-1]
    objective = float(np.sum(np.abs(x - u) ** p) + lam * len(boundaries))
    return PiecewiseResult(x, [int(b) for b in boundaries], values, objective, float(lam), p)


def _solve(u, ET, lam, p):
    return _assemble(u, _dp_boundaries(ET, lam), lam, p)


def potts_solve(u, lam: float, p: int = 2) -> PiecewiseResult:
    """Exact minimizer of ``||x - u||_p^p + lam * #jumps(x)``.

    Segment values are the mean (p=2) or the lower median (p=1). Among
    equal objectives the solution with fewer segments wins, then the one
    with the lexicographically smallest boundary list.
    """
    u = _check(u, lam, p)
    return _solve(u, segment_costs(u, p), lam, p)


def _desort(result, order):
    x = np.empty_like(result.x)
    x[order.perm] = result.x
    result.x = x
    result.order = order
    return result


def sorted_potts_solve(u, lam: float, p: int = 2) -> PiecewiseResult:
    """Potts on the stably sorted signal, mapped back to the original order."""
    u = _check(u, lam, p)
    order = SortPermutation.of(u)
    return _desort(potts_solve(u[order.perm], lam, p), order)


def threshold_jump_labels(u, eps_thr: float) -> np.ndarray:
    """Split the sorted coordinates wherever a consecutive gap exceeds ``eps_thr``."""
    if not eps_thr > 0:
        raise ValueError("eps_thr must be positive")
    u = np.asarray(u, dtype=float)
    order = SortPermutation.of(u)
    gaps = np.diff(u[order.perm]) > eps_thr
    sorted_labels = np.concatenate(([0], np.cumsum(gaps)))
    return sorted_labels[order.inverse].astype(int)


def labels_from_values(x) -> np.ndarray:
    """Integer labels numbered by increasing value; values within 1e-12 share a label."""
    if isinstance(x, PiecewiseResult):
        x = x.x
    x = np.asarray(x, dtype=float)
    order = SortPermutation.of(x)
    jumps = np.diff(x[order.perm]) > VALUE_TOL
    sorted_labels = np.concatenate(([0], np.cumsum(jumps)))
    return sorted_labels[order.inverse].astype(int)


# ---------------------------------------------------------------------------
# penalty selection


@dataclass
class LambdaSelection:
    lam: float
    labels: np.ndarray
    result: PiecewiseResult
    trace: list

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1


def spread(u, p):
    """Total squared (p=2) or absolute (p=1) deviation of ``u`` from its center."""
    u = np.asarray(u, dtype=float)
    if p == 2:
        return float(np.sum((u - u.mean()) ** 2))
    return float(np.sum(np.abs(u - np.median(u))))


def default_grid(u, p):
    return list(spread(u, p) * np.geomspace(*GRID_SPAN, GRID_SIZE))


def select_lambda(
    u,
    p: int = 1,
    grid: Optional[Sequence[float]] = None,
    sort: bool = True,
    early_stop: bool = False,
) -> LambdaSelection:
    """Pick the jump penalty by mean silhouette over an ascending grid.

    Candidates with fewer than two or more than ``n - 1`` clusters are not
    scored. The best-scoring candidate wins, ties going to fewer clusters and
    then to the smaller penalty. With ``early_stop`` the sweep ends once a
    score falls more than 0.01 below the best seen so far (after three scored
    candidates); by default the whole grid is scanned, because silhouettes of
    over-segmented solutions fluctuate and would end the sweep too early.
    ``sort=False`` uses the plain Potts model instead of sorted-Potts.
    """
    u = _check(u, 0.0, p)
    n = u.size
    if n < 3:
        raise ValueError("select_lambda needs at least 3 coordinates")
    if grid is None:
        if spread(u, p) == 0.0:
            raise SelectionError("signal appears constant: no penalty yields two or more clusters")
        grid = default_grid(u, p)
    grid = sorted(float(g) for g in grid)
    if not grid or grid[0] <= 0:
        raise ValueError("grid values must be positive")

    order = SortPermutation.of(u) if sort else None
    signal = u[order.perm] if sort else u
    ET = segment_costs(signal, p)

    trace = []
    best = None
    running_max = -np.inf
    scored = 0
    for lam in grid:
        result = _solve(signal, ET, lam, p)
        if sort:
            result = _desort(result, order)
        labels = labels_from_values(result.x)
        k = int(labels.max()) + 1
        entry = {"lambda": lam, "k": k, "silhouette": None}
        trace.append(entry)
        if not 2 <= k <= n - 1:
            continue
        score = silhouette_1d(u, labels)
        entry["silhouette"] = score
        scored += 1
        key = (-score, k, lam)
        if best is None or key < best[0]:
            best = (key, lam, labels, result)
        running_max = max(running_max, score)
        if early_stop and scored >= MIN_CANDIDATES and score < running_max - SILHOUETTE_DROP:
            break
    if best is None:
        raise SelectionError("signal appears constant: no penalty in the grid yields two or more clusters")
    _, lam, labels, result = best
    return LambdaSelection(lam, labels, result, trace)
