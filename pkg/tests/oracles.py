"""Slow, straightforward reference implementations used only by the tests.

None of these share code with the package: they loop where the package
vectorizes and enumerate where it optimizes.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# Potts brute force


def _segment_value(seg, p):
    # same definitions as the solver: mean, or lower median
    return float(np.mean(seg)) if p == 2 else float(np.sort(seg)[(len(seg) - 1) // 2])


def potts_brute_force(u, lam, p, rtol=1e-12):
    """Best segmentation over all ``2**(n-1)`` choices.

    Candidates are ranked by per-segment costs summed in Python. Everything
    within ``rtol * (|best| + lam)`` of the best counts as tied (summation
    order alone can split an exact tie); ties go to fewer segments, then to
    the lexicographically smallest boundary list. Returns the definitional
    objective ``sum(|x - u|**p) + lam * jumps`` of the winner and its
    boundaries.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    cost = {}
    for i in range(n):
        for j in range(i + 1, n + 1):
            seg = [float(t) for t in u[i:j]]
            if p == 2:
                c = sum(seg) / len(seg)
                cost[i, j] = sum((t - c) ** 2 for t in seg)
            else:
                c = sorted(seg)[(len(seg) - 1) // 2]
                cost[i, j] = sum(abs(t - c) for t in seg)
    scored = []
    for bits in itertools.product((0, 1), repeat=n - 1):
        bnd = tuple(k + 1 for k, b in enumerate(bits) if b)
        edges = (0, *bnd, n)
        total = sum(cost[a, b] for a, b in zip(edges[:-1], edges[1:])) + lam * len(bnd)
        scored.append((total, bnd))
    best = min(t for t, _ in scored)
    _, bnd = min((len(b), b) for t, b in scored if t <= best + rtol * (abs(best) + lam))
    edges = (0, *bnd, n)
    x = np.concatenate([np.full(b - a, _segment_value(u[a:b], p)) for a, b in zip(edges[:-1], edges[1:])])
    return float(np.sum(np.abs(x - u) ** p) + lam * len(bnd)), list(bnd)


# ---------------------------------------------------------------------------
# clustering metrics


def nmi_direct(z, w):
    n = len(z)
    a_labels, b_labels = sorted(set(z)), sorted(set(w))
    pa = {a: sum(1 for t in z if t == a) / n for a in a_labels}
    pb = {b: sum(1 for t in w if t == b) / n for b in b_labels}
    mi = 0.0
    for a in a_labels:
        for b in b_labels:
            pab = sum(1 for s, t in zip(z, w) if s == a and t == b) / n
            if pab > 0:
                mi += pab * math.log(pab / (pa[a] * pb[b]))
    ha = -sum(q * math.log(q) for q in pa.values())
    hb = -sum(q * math.log(q) for q in pb.values())
    if ha + hb == 0:
        return 1.0
    return mi / ((ha + hb) / 2)


def clustering_error_enum(z, w):
    """Minimum error over every injective relabeling of the predicted clusters."""
    z, w = list(z), list(w)
    a_labels, b_labels = sorted(set(z)), sorted(set(w))
    k = max(len(a_labels), len(b_labels))
    targets = a_labels + [None] * (k - len(a_labels))
    best = 0
    for perm in itertools.permutations(targets, len(b_labels)):
        mapping = dict(zip(b_labels, perm))
        hits = sum(1 for s, t in zip(z, w) if mapping[t] == s)
        best = max(best, hits)
    return 1 - best / len(z)


def silhouette_direct(x, labels):
    x, labels = list(map(float, x)), list(labels)
    n = len(x)
    out = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(abs(x[i] - x[j]) for j in own) / len(own)
        b = math.inf
        for lab in set(labels) - {labels[i]}:
            members = [j for j in range(n) if labels[j] == lab]
            b = min(b, sum(abs(x[i] - x[j]) for j in members) / len(members))
        d = max(a, b)
        out.append(0.0 if d == 0 else (b - a) / d)
    return sum(out) / n


# ---------------------------------------------------------------------------
# linear algebra and transport


def jacobi_eigh(A, sweeps=100, tol=1e-15):
    """Cyclic Jacobi eigenvalue iteration for a symmetric matrix; ascending order."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(sweeps):
        off = math.sqrt(sum(A[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol:
            break
        for p_ in range(n - 1):
            for q in range(p_ + 1, n):
                if abs(A[p_, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p_, p_]) / (2 * A[p_, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                J = np.eye(n)
                J[p_, p_] = J[q, q] = c
                J[p_, q] = s
                J[q, p_] = -s
                A = J.T @ A @ J
                V = V @ J
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def sinkhorn_loop(M, a, b, eps, tol=1e-12, max_iter=1_000_000):
    """Textbook Sinkhorn written with explicit Python loops."""
    m, n = len(a), len(b)
    K = [[math.exp(-M[i][j] / eps) for j in range(n)] for i in range(m)]
    u = [1.0] * m
    v = [1.0] * n
    for _ in range(max_iter):
        u = [a[i] / sum(K[i][j] * v[j] for j in range(n)) for i in range(m)]
        v = [b[j] / sum(K[i][j] * u[i] for i in range(m)) for j in range(n)]
        rows = [sum(u[i] * K[i][j] * v[j] for j in range(n)) for i in range(m)]
        if max(abs(r - ai) for r, ai in zip(rows, a)) < tol:
            break
    return np.array([[u[i] * K[i][j] * v[j] for j in range(n)] for i in range(m)])


def random_couplings(a, b, count, rng, sweeps=500):
    """Feasible couplings: random positive matrices scaled to the marginals."""
    G = rng.random((count, len(a), len(b))) ** 3 + 1e-12
    for _ in range(sweeps):
        G *= (a / G.sum(axis=2))[:, :, None]
        G *= (b / G.sum(axis=1))[:, None, :]
    return list(G)


def reg_ot_loss_direct(G, M, a, b, eps):
    total = 0.0
    for i in range(len(a)):
        for j in range(len(b)):
            g = G[i, j]
            kl = (g * math.log(g / (a[i] * b[j])) if g > 0 else 0.0) - g + a[i] * b[j]
            total += M[i, j] * g + eps * kl
    return total
