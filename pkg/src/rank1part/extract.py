"""Step 1: extractors mapping a data matrix to cluster-generating vectors.

Each ``extract_*`` function returns a :class:`CgVectorPair` holding a row
vector ``u`` and, for co-clustering methods, a column vector ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform
from scipy.special import logsumexp, xlogy

from .errors import ConvergenceError, NumericalError
from .matrix import (
    DataMatrix,
    SimilarityMatrix,
    as_data_matrix,
    build_similarity,
    column_stochastic,
    normalized_laplacian,
    sinkhorn_knopp_ds,
)

FLOOR = 1e-300
LOG_DOMAIN_RATIO = 0.05


@dataclass
class CgVectorPair:
    u: np.ndarray
    v: Optional[np.ndarray]
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class TransportPlan:
    """Entropic transport plan ``diag(u) exp(-M/eps) diag(v)``.

    ``log_u`` and ``log_v`` are kept alongside ``u`` and ``v`` because the
    scalings can leave the floating point range when ``eps`` is small.
    """

    gamma: np.ndarray
    u: np.ndarray
    v: np.ndarray
    epsilon: float
    cost: np.ndarray
    log_u: np.ndarray
    log_v: np.ndarray
    n_iter: int = 0
    residual: float = 0.0
    log_domain: bool = False


# ---------------------------------------------------------------------------
# rank-one NMF


def _kl_objective(X, W, u, v):
    uv = np.outer(u, v)
    terms = xlogy(X, X) - xlogy(X, uv) - X + uv
    return float(np.sum(terms, where=W))


def _euclidean_objective(X, W, u, v):
    return float(np.sum((X - np.outer(u, v)) ** 2, where=W))


def _nmf_single(X, W, u, v, loss, max_iter, tol, keep_history):
    objective = _kl_objective if loss == "kl" else _euclidean_objective
    Wf = W.astype(float)
    WX = np.where(W, X, 0.0)
    row_mass = WX.sum(axis=1)
    col_mass = WX.sum(axis=0)
    obj = objective(X, W, u, v)
    history = [obj] if keep_history else None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if loss == "kl":
            # u_i <- u_i * sum_j (A_ij / (u_i v_j)) v_j / sum_j v_j, over observed j
            u = np.maximum(row_mass / (Wf @ v), FLOOR)
            v = np.maximum(col_mass / (Wf.T @ u), FLOOR)
        else:
            u = np.maximum(u * (WX @ v) / ((Wf * np.outer(u, v)) @ v), FLOOR)
            v = np.maximum(v * (WX.T @ u) / ((Wf * np.outer(u, v)).T @ u), FLOOR)
        new = objective(X, W, u, v)
        if not np.isfinite(new):
            raise NumericalError(f"rank-one NMF objective became non-finite at iteration {n_iter}")
        if keep_history:
            history.append(new)
        decrease = obj - new
        obj = new
        if obj == 0.0 or decrease < tol * max(abs(obj + decrease), FLOOR):
            break
    return u, v, obj, n_iter, history


def extract_nmf_rank1(
    A,
    loss: str = "kl",
    restarts: int = 100,
    max_iter: int = 1000,
    tol: float = 1e-12,
    seed: int = 0,
    keep_history: bool = False,
) -> CgVectorPair:
    """Rank-one nonnegative factorization ``A ~ u v^T`` by multiplicative updates.

    Every restart starts from ``Uniform(0.5, 1.5)`` factors rescaled so that
    ``sum(u) * sum(v)`` equals the observed mass, runs until the relative
    objective decrease falls below ``tol``, and is normalized to
    ``sum(u) == 1``. The returned vectors are the average over restarts.
    Unobserved entries (mask) are ignored by both the updates and the loss.
    """
    if loss not in ("kl", "euclidean"):
        raise ValueError(f"unknown loss {loss!r}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    D = as_data_matrix(A)
    D.require_nonnegative("extract_nmf_rank1")
    W = D.observed
    X = np.where(W, D.values, 0.0)
    mass = X.sum()
    if mass <= 0:
        raise ValueError("extract_nmf_rank1 needs a positive observed mass")

    seqs = np.random.SeedSequence(seed).spawn(restarts)
    us, vs, objs, iters, histories = [], [], [], [], []
    for seq in seqs:
        rng = np.random.default_rng(seq)
        u = rng.uniform(0.5, 1.5, D.m)
        v = rng.uniform(0.5, 1.5, D.n)
        scale = np.sqrt(mass / (u.sum() * v.sum()))
        u, v, obj, n_iter, history = _nmf_single(X, W, u * scale, v * scale, loss, max_iter, tol, keep_history)
        s = u.sum()
        us.append(u / s)
        vs.append(v * s)
        objs.append(obj)
        iters.append(n_iter)
        histories.append(history)

    u = np.mean(us, axis=0)
    v = np.mean(vs, axis=0)
    diagnostics = {
        "loss": loss,
        "restarts": restarts,
        "seed": seed,
        "n_iter": int(max(iters)),
        "objective": float(min(objs)),
        "restart_objectives": objs,
    }
    if keep_history:
        diagnostics["histories"] = histories
    return CgVectorPair(u, v, f"nmf_{loss}" if loss != "kl" else "nmf", diagnostics)


# ---------------------------------------------------------------------------
# entropic optimal transport


def _check_simplex(w, name):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or not (w > 0).all():
        raise ValueError(f"{name} must be a strictly positive vector")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def extract_sinkhorn(M, a, b, epsilon: float, tol: float = 1e-9, max_iter: int = 100_000) -> TransportPlan:
    """Solve entropic OT with cost ``M`` and marginals ``a``, ``b`` by Sinkhorn scaling.

    Switches to log-domain updates when ``epsilon <= 0.05 * (max M - min M)``.
    The returned ``u`` is normalized to sum to one; ``v`` absorbs the scale.
    """
    M = np.asarray(M, dtype=float)
    a = _check_simplex(a, "a")
    b = _check_simplex(b, "b")
    if M.shape != (a.size, b.size):
        raise ValueError(f"cost shape {M.shape} does not match marginals ({a.size}, {b.size})")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not np.isfinite(M).all():
        raise ValueError("cost matrix must be finite")

    shift = M.min()
    Ms = (M - shift) / epsilon
    log_domain = epsilon <= LOG_DOMAIN_RATIO * (M.max() - shift)
    log_a, log_b = np.log(a), np.log(b)

    if not log_domain:
        K = np.exp(-Ms)
        u = np.ones_like(a)
        v = np.ones_like(b)
        residual = np.inf
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            for it in range(max_iter + 1):
                Kv = K @ v
                if it > 0:
                    residual = np.abs(u * Kv - a).max()
                    if residual <= tol:
                        break
                u = a / Kv
                v = b / (K.T @ u)
                if not (np.isfinite(u).all() and np.isfinite(v).all()):
                    log_domain = True
                    break
        if not log_domain:
            log_u, log_v = np.log(u), np.log(v)

    if log_domain:
        log_u = np.zeros_like(a)
        log_v = np.zeros_like(b)
        residual = np.inf
        for it in range(max_iter + 1):
            row_lse = logsumexp(log_v[None, :] - Ms, axis=1)
            if it > 0:
                residual = np.abs(np.exp(log_u + row_lse) - a).max()
                if residual <= tol:
                    break
            log_u = log_a - row_lse
            log_v = log_b - logsumexp(log_u[:, None] - Ms, axis=0)

    if residual > tol:
        raise ConvergenceError(
            f"Sinkhorn did not reach tol={tol:g} in {max_iter} iterations (residual {residual:.3e})",
            residual=float(residual),
            n_iter=max_iter,
        )

    # undo the cost shift on v, then move the scale of u into v
    log_v = log_v + shift / epsilon
    norm = logsumexp(log_u)
    log_u = log_u - norm
    log_v = log_v + norm
    gamma = np.exp(log_u[:, None] - M / epsilon + log_v[None, :])
    with np.errstate(over="ignore"):
        u, v = np.exp(log_u), np.exp(log_v)
    return TransportPlan(
        gamma=gamma,
        u=u,
        v=v,
        epsilon=float(epsilon),
        cost=M,
        log_u=log_u,
        log_v=log_v,
        n_iter=it,
        residual=float(residual),
        log_domain=bool(log_domain),
    )


def reg_ot_loss(gamma, M, a, b, epsilon: float) -> float:
    """``<M, gamma> + eps * KL(gamma || a b^T)`` with ``0 log 0 = 0``."""
    gamma = np.asarray(gamma, dtype=float)
    M = np.asarray(M, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if gamma.shape != M.shape or gamma.shape != (a.size, b.size):
        raise ValueError("gamma, M, a, b have inconsistent shapes")
    if (gamma < 0).any():
        raise ValueError("gamma must be nonnegative")
    if not ((a > 0).all() and (b > 0).all()):
        raise ValueError("a and b must be positive")
    ab = np.outer(a, b)
    kl = np.sum(xlogy(gamma, gamma) - xlogy(gamma, ab) - gamma + ab)
    return float(np.sum(M * gamma) + epsilon * kl)


def _default_epsilon(M):
    mean = float(np.mean(M))
    return 0.1 * mean if mean > 0 else 1.0


def extract_ccot(A, epsilon: Optional[float] = None, tol: float = 1e-9, max_iter: int = 100_000) -> CgVectorPair:
    """Sinkhorn scalings between the rows and the columns of a square matrix.

    Cost ``M[i, j] = ||A[i, :] - A[:, j]||``, uniform marginals. ``epsilon``
    defaults to ``0.1 * mean(M)``.
    """
    X = as_data_matrix(A).require_full("extract_ccot")
    m, n = X.shape
    if m != n:
        raise ValueError(f"extract_ccot needs a square matrix (got {m}x{n}); use extract_ccot_gw instead")
    M = cdist(X, X.T)
    eps = _default_epsilon(M) if epsilon is None else float(epsilon)
    plan = extract_sinkhorn(M, np.full(m, 1.0 / m), np.full(n, 1.0 / n), eps, tol=tol, max_iter=max_iter)
    return CgVectorPair(
        plan.u,
        plan.v,
        "ccot",
        {"epsilon": eps, "n_iter": plan.n_iter, "residual": plan.residual, "log_domain": plan.log_domain},
    )


def extract_ccot_gw(
    A,
    epsilon: Optional[float] = None,
    outer_iter: int = 50,
    tol: float = 1e-9,
    inner_tol: float = 1e-9,
    inner_max_iter: int = 100_000,
) -> CgVectorPair:
    """Entropic Gromov-Wasserstein between the row space and the column space.

    Uses the square loss between the intra-row and intra-column Euclidean
    distance matrices and uniform weights. Each outer step linearizes the
    objective at the current coupling and solves the resulting entropic OT
    problem; ``epsilon`` defaults to ``0.1 * mean`` of the first pseudo-cost
    and is kept fixed across outer steps. Stops when the L1 change of the
    coupling drops below ``tol``.
    """
    X = as_data_matrix(A).require_full("extract_ccot_gw")
    m, n = X.shape
    Cr = squareform(pdist(X)) if m > 1 else np.zeros((1, 1))
    Cc = squareform(pdist(X.T)) if n > 1 else np.zeros((1, 1))
    a = np.full(m, 1.0 / m)
    b = np.full(n, 1.0 / n)
    const = (Cr**2 @ a)[:, None] + (Cc**2 @ b)[None, :]
    gamma = np.outer(a, b)
    eps = epsilon
    plan = None
    change = np.inf
    it = 0
    for it in range(1, outer_iter + 1):
        pseudo = np.maximum(const - 2.0 * Cr @ gamma @ Cc.T, 0.0)
        if eps is None:
            eps = _default_epsilon(pseudo)
        plan = extract_sinkhorn(pseudo, a, b, eps, tol=inner_tol, max_iter=inner_max_iter)
        change = float(np.abs(plan.gamma - gamma).sum())
        gamma = plan.gamma
        if change < tol:
            break
    return CgVectorPair(
        plan.u,
        plan.v,
        "ccot_gw",
        {"epsilon": float(eps), "outer_iter": it, "coupling_change": change, "residual": plan.residual},
    )


# ---------------------------------------------------------------------------
# spectral extractors


def _sign_fix(u):
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0 else u


def fiedler_vector(S, tol: float = 1e-8):
    """Second eigenpair of the normalized Laplacian of ``S``.

    The vector is orthogonalized against ``sqrt(degrees)`` so that a repeated
    zero eigenvalue (disconnected graph) still yields a kernel-free vector.
    Returns ``(u, lambda_2, residual, degrees)``.
    """
    L = normalized_laplacian(S)
    m = L.size
    if m < 2:
        raise ValueError("the Fiedler vector needs at least two rows")
    w, V = np.linalg.eigh(L.values)
    q = np.sqrt(L.degrees)
    q /= np.linalg.norm(q)
    P = V[:, :2] - np.outer(q, q @ V[:, :2])
    left, _, _ = np.linalg.svd(P, full_matrices=False)
    u = left[:, 0]
    u = u - q * (q @ u)
    u /= np.linalg.norm(u)
    lam = float(u @ L.values @ u)
    residual = float(np.linalg.norm(L.values @ u - lam * u))
    if not np.isfinite(residual) or residual > tol:
        raise NumericalError(f"Fiedler eigenpair residual {residual:.3e} exceeds tol {tol:g}")
    return _sign_fix(u), lam, residual, L.degrees


def extract_fiedler(A, variant: str = "raw", tol: float = 1e-8, sigma: Optional[float] = None) -> CgVectorPair:
    """Fiedler vector of the Gaussian-kernel similarity between rows of ``A``.

    ``variant="ds"`` first scales the similarity to doubly stochastic form.
    """
    if variant not in ("raw", "ds"):
        raise ValueError(f"unknown Fiedler variant {variant!r}")
    S = build_similarity(A, sigma)
    values = S.values
    if variant == "ds":
        S_ds, _, _ = sinkhorn_knopp_ds(values)
        values = 0.5 * (S_ds + S_ds.T)
    u, lam, residual, _ = fiedler_vector(values, tol=tol)
    return CgVectorPair(
        u,
        None,
        "fiedler" if variant == "raw" else "fiedler_ds",
        {"eigenvalue": lam, "residual": residual, "sigma": S.sigma},
    )


def pagerank_vector(S, damping: float = 0.85, tol: float = 1e-12, max_iter: int = 10_000):
    """Stationary vector of ``damping * colstoch(S) + (1 - damping) / m``.

    Returns ``(u, n_iter, last_step)`` where ``last_step`` is the L1 size of
    the final power-iteration step.
    """
    if not 0.0 <= damping <= 1.0:
        raise ValueError("damping must lie in [0, 1]")
    S = S.values if isinstance(S, SimilarityMatrix) else S
    P = column_stochastic(S)
    m = P.shape[0]
    if P.shape[1] != m:
        raise ValueError("pagerank needs a square matrix")
    u = np.full(m, 1.0 / m)
    step = np.inf
    for it in range(1, max_iter + 1):
        new = damping * (P @ u) + (1.0 - damping) / m
        new /= new.sum()
        step = float(np.abs(new - u).sum())
        u = new
        if step <= tol:
            return u, it, step
    raise ConvergenceError(f"PageRank did not converge in {max_iter} iterations (step {step:.3e})", step, max_iter)


def extract_pagerank(
    A, damping: float = 0.85, tol: float = 1e-12, max_iter: int = 10_000, sigma: Optional[float] = None
) -> CgVectorPair:
    """PageRank vector of the Gaussian-kernel row similarity of ``A``."""
    S = build_similarity(A, sigma)
    u, n_iter, step = pagerank_vector(S.values, damping, tol, max_iter)
    return CgVectorPair(u, None, "pagerank", {"n_iter": n_iter, "last_step": step, "sigma": S.sigma, "damping": damping})


# ---------------------------------------------------------------------------
# statistical extractor


def extract_marginals(A) -> CgVectorPair:
    """Row means ``u`` and column means ``v`` of a nonnegative matrix."""
    D = as_data_matrix(A)
    X = D.require_full("extract_marginals")
    D.require_nonnegative("extract_marginals")
    return CgVectorPair(X.sum(axis=1) / D.n, X.sum(axis=0) / D.m, "marginal", {})


__all__ = [
    "CgVectorPair",
    "DataMatrix",
    "TransportPlan",
    "extract_ccot",
    "extract_ccot_gw",
    "extract_fiedler",
    "extract_marginals",
    "extract_nmf_rank1",
    "extract_pagerank",
    "extract_sinkhorn",
    "fiedler_vector",
    "pagerank_vector",
    "reg_ot_loss",
]
