"""Benchmark harness: repeated generation, every method, aggregated tables.

Run ``k`` of a benchmark uses seed ``base_seed + k`` for both the dataset and
(on a separate stream) the added noise, so any single cell can be re-run on
its own. Runs are independent; aggregation sorts by run index first, which
keeps the tables byte-identical whatever the execution order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .lbm import ConfigError, LbmConfig, add_noise, generate_lbm, resolve_config
from .pipeline import METHODS, STEP2, evaluate_run, timed_pipeline

THREADS_ENV = "RANK1PART_THREADS"
DEFAULT_RUNS = 20
CONDITIONS = ("clean", "noisy")


@dataclass
class ExperimentSpec:
    configs: list
    methods: list = field(default_factory=lambda: list(METHODS))
    step2: str = "sorted_potts"
    p: int = 1
    noise: Optional[float] = None
    runs: int = DEFAULT_RUNS
    base_seed: int = 0
    output_dir: str = "bench_out"
    restarts: int = 100
    epsilon: Optional[float] = None

    def __post_init__(self):
        if not self.configs:
            raise ConfigError("configs", "must list at least one configuration")
        if not self.methods:
            raise ConfigError("methods", "must list at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError("methods", f"unknown method {unknown[0]!r}")
        if self.step2 not in STEP2:
            raise ConfigError("step2", f"expected one of {', '.join(STEP2)}")
        if self.p not in (1, 2):
            raise ConfigError("p", "must be 1 or 2")
        if isinstance(self.runs, bool) or not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs", "must be an integer >= 1")
        if self.noise is not None and not self.noise >= 0:
            raise ConfigError("noise", "must be a nonnegative number")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon", "must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "bench spec must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        if "configs" not in data:
            raise ConfigError("configs", "missing")
        return cls(**data)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["configs"] = [c.to_dict() if isinstance(c, LbmConfig) else c for c in self.configs]
        return d


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(THREADS_ENV, f"must be an integer, got {raw!r}") from None
    if count < 0:
        raise ConfigError(THREADS_ENV, "must be >= 0")
    return count


def _run_one(task):
    """All methods and conditions for one (config, run index); returns report dicts."""
    config, k, spec, out = task
    seed = spec.base_seed + k
    ds = generate_lbm(config, seed)
    datasets = [("clean", ds.A)]
    if spec.noise is not None:
        datasets.append(("noisy", add_noise(ds.A, spec.noise, seed)))
    records = []
    for condition, A in datasets:
        for method in spec.methods:
            run_dir = Path(out) / config.name / method / f"run{k}" / condition
            run_dir.mkdir(parents=True, exist_ok=True)
            rec = {"config": config.name, "condition": condition, "method": method, "run": k, "seed": seed}
            try:
                result, elapsed = timed_pipeline(
                    A, method, step2=spec.step2, p=spec.p, epsilon=spec.epsilon, seed=seed, restarts=spec.restarts
                )
            except Exception as exc:  # recorded per cell, never fatal
                rec.update(ok=False, error=f"{type(exc).__name__}: {exc}")
                io.write_json(run_dir / "report.json", rec)
                records.append(rec)
                continue
            settings = {"step2": spec.step2, "p": spec.p, "epsilon": spec.epsilon, "restarts": spec.restarts}
            report = evaluate_run(result, ds.z_R, ds.z_C, config=config.name, seed=seed, wall_time=elapsed, settings=settings)
            rec.update(ok=True, **{key: val for key, val in report.to_dict().items() if key not in rec})
            io.write_vector(run_dir / "u.txt", result.u)
            io.write_vector(run_dir / "u_denoised.txt", result.u_denoised)
            if result.v is not None:
                io.write_vector(run_dir / "v.txt", result.v)
            io.write_labels(run_dir / "labels.csv", result.z_R, result.z_C)
            io.write_json(run_dir / "report.json", rec)
            records.append(rec)
    return records


def _stats(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def aggregate(records, spec: ExperimentSpec, config_names) -> list:
    """One cell per (config, condition, method) in spec order."""
    conditions = ["clean"] + (["noisy"] if spec.noise is not None else [])
    key = lambda r: (r["config"], r["condition"], r["method"], r["run"])  # noqa: E731
    records = sorted(records, key=key)
    cells = []
    for name in config_names:
        for condition in conditions:
            for method in spec.methods:
                rs = [r for r in records if (r["config"], r["condition"], r["method"]) == (name, condition, method)]
                done = [r for r in rs if r["ok"]]
                cell = {"config": name, "condition": condition, "method": method, "completed": len(done), "failed": len(rs) - len(done)}
                for metric in ("nmi_rows", "nmi_cols", "ce_rows", "ce_cols", "cce"):
                    cell[f"{metric}_mean"], cell[f"{metric}_std"] = _stats([r[metric] for r in done])
                cell["wall_time_mean"], _ = _stats([r["wall_time"] for r in done])
                cells.append(cell)
    return cells


def _fmt_cell(cell):
    if cell["nmi_rows_mean"] is None:
        text = "nan"
    else:
        text = f"{cell['nmi_rows_mean']:.3f}±{cell['nmi_rows_std']:.3f}"
    if cell["failed"]:
        text += f" ({cell['failed']} failed)"
    return text


def table1_csv(cells, spec: ExperimentSpec, config_names) -> str:
    conditions = ["clean"] + (["noisy"] if spec.noise is not None else [])
    lookup = {(c["config"], c["condition"], c["method"]): c for c in cells}
    columns = [(name, cond) for cond in conditions for name in config_names]
    lines = ["method," + ",".join(f"{name} {cond}" for name, cond in columns)]
    for method in spec.methods:
        lines.append(method + "," + ",".join(_fmt_cell(lookup[(n, c, method)]) for n, c in columns))
    return "\n".join(lines) + "\n"


def figure4_txt(cells, spec: ExperimentSpec, config_names) -> str:
    """Per method, ``config CCE-percent`` lines (clean, then noisy when present)."""
    conditions = ["clean"] + (["noisy"] if spec.noise is not None else [])
    lookup = {(c["config"], c["condition"], c["method"]): c for c in cells}
    lines = []
    for method in spec.methods:
        for cond in conditions:
            lines.append(f"# {method} {cond}")
            for name in config_names:
                value = lookup[(name, cond, method)]["cce_mean"]
                lines.append(f"{name} {'nan' if value is None else format(100.0 * value, '.4f')}")
    return "\n".join(lines) + "\n"


def run_bench(spec: ExperimentSpec, workers: Optional[int] = None) -> dict:
    """Execute a benchmark and write ``table1.csv``, ``figure4.txt`` and ``bench.json``."""
    configs = [resolve_config(ref) for ref in spec.configs]
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("configs", "configuration names must be unique")
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count() if workers is None else workers
    tasks = [(config, k, spec, str(out)) for config in configs for k in range(spec.runs)]
    if workers == 0:
        batches = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_one, tasks))
    records = [r for batch in batches for r in batch]
    cells = aggregate(records, spec, names)
    (out / "table1.csv").write_text(table1_csv(cells, spec, names), encoding="utf-8")
    (out / "figure4.txt").write_text(figure4_txt(cells, spec, names), encoding="utf-8")
    summary = {"spec": spec.to_dict(), "cells": cells, "runs": sorted(records, key=lambda r: (r["config"], r["condition"], r["method"], r["run"]))}
    io.write_json(out / "bench.json", summary)
    return summary
