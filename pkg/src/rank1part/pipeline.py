"""The two-step procedure: extract cluster-generating vectors, then denoise them into labels."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import extract as ex
from .lbm import nonnegative_shift
from .matrix import as_data_matrix
from .metrics import CoPartition, RunReport, cce, clustering_error, nmi
from .potts import labels_from_values, potts_solve, select_lambda, sorted_potts_solve, threshold_jump_labels

METHODS = ("nmf", "ccot", "ccot_gw", "fiedler", "fiedler_ds", "pagerank", "marginal")
COCLUSTER_METHODS = ("nmf", "ccot", "ccot_gw", "marginal")
NONNEGATIVE_METHODS = ("nmf", "marginal")
STEP2 = ("potts", "sorted_potts", "threshold")
THRESHOLD_FRACTION = 0.1


def extract_vectors(A, method, epsilon=None, seed=0, restarts=100, columns=True):
    """Run one Step-1 extractor; returns ``(u, v, diagnostics)``.

    Row-only methods (spectral, PageRank) produce ``v`` by re-running on the
    transpose when ``columns`` is true.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r} (expected one of {', '.join(METHODS)})")
    D = as_data_matrix(A)
    diagnostics = {}
    if method in NONNEGATIVE_METHODS:
        D, shift = nonnegative_shift(D)
        diagnostics["shift"] = shift

    def run(X):
        if method == "nmf":
            return ex.extract_nmf_rank1(X, restarts=restarts, seed=seed)
        if method == "ccot":
            return ex.extract_ccot(X, epsilon=epsilon)
        if method == "ccot_gw":
            return ex.extract_ccot_gw(X, epsilon=epsilon)
        if method == "fiedler":
            return ex.extract_fiedler(X, "raw")
        if method == "fiedler_ds":
            return ex.extract_fiedler(X, "ds")
        if method == "pagerank":
            return ex.extract_pagerank(X)
        return ex.extract_marginals(X)

    pair = run(D)
    diagnostics["rows"] = pair.diagnostics
    v = pair.v
    if v is None and columns:
        col_pair = run(D.T)
        v = col_pair.u
        diagnostics["cols"] = col_pair.diagnostics
    return pair.u, v, diagnostics


def partition_vector(u, step2="sorted_potts", p=1, lam=None):
    """Turn one cluster-generating vector into labels.

    ``lam`` is the jump penalty for the Potts variants (selected by silhouette
    when absent; signals shorter than three keep each distinct value) and the gap threshold for ``threshold`` (default: a tenth of
    the range of ``u``). Returns ``(labels, denoised, info)``.
    """
    u = np.asarray(u, dtype=float)
    if step2 not in STEP2:
        raise ValueError(f"unknown step2 {step2!r} (expected one of {', '.join(STEP2)})")
    if step2 == "threshold":
        thr = lam if lam is not None else THRESHOLD_FRACTION * float(np.ptp(u))
        if not thr > 0:
            from .errors import SelectionError

            raise SelectionError("signal appears constant: threshold has nothing to split")
        labels = threshold_jump_labels(u, thr)
        centers = np.array([u[labels == k].mean() for k in range(labels.max() + 1)])
        return labels, centers[labels], {"threshold": thr, "k": int(labels.max()) + 1}
    if lam is None and u.size < 3:
        # too short to score a silhouette: every distinct value is its own cluster
        labels = labels_from_values(u)
        return labels, u.copy(), {"lambda": 0.0, "k": int(labels.max()) + 1, "selected": False}
    if lam is None:
        sel = select_lambda(u, p=p, sort=step2 == "sorted_potts")
        return sel.labels, sel.result.x, {"lambda": sel.lam, "k": sel.k, "selected": True}
    solver = sorted_potts_solve if step2 == "sorted_potts" else potts_solve
    result = solver(u, lam, p)
    labels = labels_from_values(result.x)
    return labels, result.x, {"lambda": float(lam), "k": int(labels.max()) + 1, "selected": False}


@dataclass
class PipelineResult:
    method: str
    u: np.ndarray
    v: Optional[np.ndarray]
    u_denoised: np.ndarray
    v_denoised: Optional[np.ndarray]
    z_R: np.ndarray
    z_C: Optional[np.ndarray]
    info: dict = field(default_factory=dict)

    @property
    def partition(self) -> CoPartition:
        return CoPartition(self.z_R, self.z_C)


def run_pipeline(A, method, step2="sorted_potts", p=1, lam=None, epsilon=None, seed=0, restarts=100, columns=True):
    """Step 1 followed by Step 2 on rows and (optionally) columns."""
    u, v, diagnostics = extract_vectors(A, method, epsilon=epsilon, seed=seed, restarts=restarts, columns=columns)
    z_R, u_den, row_info = partition_vector(u, step2, p, lam)
    z_C = v_den = col_info = None
    if v is not None and columns:
        z_C, v_den, col_info = partition_vector(v, step2, p, lam)
    info = {"step1": diagnostics, "rows": row_info, "cols": col_info, "step2": step2, "p": p}
    return PipelineResult(method, u, v, u_den, v_den, z_R, z_C, info)


def evaluate_run(result: PipelineResult, z_R, z_C=None, *, config="", seed=0, wall_time=0.0, settings=None) -> RunReport:
    report = RunReport(method=result.method, config=config, seed=seed, wall_time=wall_time, settings=settings or {})
    report.nmi_rows = nmi(z_R, result.z_R)
    report.ce_rows = clustering_error(z_R, result.z_R)
    k_c = None
    if z_C is not None and result.z_C is not None:
        report.nmi_cols = nmi(z_C, result.z_C)
        report.ce_cols = clustering_error(z_C, result.z_C)
        report.cce = cce(z_R, z_C, result.z_R, result.z_C)
        k_c = int(result.z_C.max()) + 1
    report.k_found = (int(result.z_R.max()) + 1, k_c)
    return report


def timed_pipeline(A, method, **kwargs):
    start = time.perf_counter()
    result = run_pipeline(A, method, **kwargs)
    return result, time.perf_counter() - start
