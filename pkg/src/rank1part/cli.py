"""``rank1part`` command line: generate, run, bench, evaluate.

Exit codes: 0 success, 2 argument or configuration error, 3 convergence,
numerical or selection failure, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .bench import ExperimentSpec, run_bench
from .errors import Rank1Error
from .lbm import add_noise, generate_lbm, resolve_config
from .metrics import cce, clustering_error, nmi
from .pipeline import COCLUSTER_METHODS, METHODS, STEP2, evaluate_run, timed_pipeline

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


def _counts(z):
    return [int(c) for c in np.bincount(z)]


def cmd_generate(args) -> int:
    config = resolve_config(args.config)
    ds = generate_lbm(config, args.seed)
    A = ds.A
    if args.noise_sigma is not None:
        A = add_noise(A, args.noise_sigma, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix(out / "matrix.csv", A)
    io.write_labels(io.labels_path(out / "matrix.csv"), ds.z_R, ds.z_C)
    print(f"config {config.name}: shape {A.m}x{A.n}, k_r={config.k_r}, k_c={config.k_c}, seed={args.seed}")
    print(f"row cluster sizes: {_counts(ds.z_R)}")
    print(f"column cluster sizes: {_counts(ds.z_C)}")
    print(f"wrote {out / 'matrix.csv'}")
    return EXIT_OK


def cmd_run(args) -> int:
    A = io.read_matrix(args.matrix)
    truth = None
    sidecar = Path(args.labels) if args.labels else io.labels_path(args.matrix)
    if args.labels or sidecar.exists():
        truth = io.read_labels(sidecar)
    try:
        result, elapsed = timed_pipeline(
            A, args.method, step2=args.step2, p=args.p, lam=args.lam, epsilon=args.epsilon, seed=args.seed
        )
    except Rank1Error as exc:
        raise type(exc)(f"{args.method}: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_vector(out / "u.txt", result.u)
    io.write_vector(out / "u_denoised.txt", result.u_denoised)
    if result.v is not None:
        io.write_vector(out / "v.txt", result.v)
    if result.v_denoised is not None:
        io.write_vector(out / "v_denoised.txt", result.v_denoised)
    io.write_labels(out / "labels.csv", result.z_R, result.z_C)
    settings = {"step2": args.step2, "p": args.p, "lambda": args.lam, "epsilon": args.epsilon}
    report = {
        "method": args.method,
        "matrix": str(args.matrix),
        "shape": list(A.shape),
        "coclustering": args.method in COCLUSTER_METHODS,
        "k_rows": result.info["rows"]["k"],
        "k_cols": result.info["cols"]["k"] if result.info["cols"] else None,
        "lambda_rows": result.info["rows"].get("lambda", result.info["rows"].get("threshold")),
        "wall_time": elapsed,
        "settings": settings,
    }
    if truth is not None:
        z_R, z_C = truth
        metrics = evaluate_run(result, z_R, z_C, config=str(args.matrix), seed=args.seed, wall_time=elapsed, settings=settings)
        report.update({k: v for k, v in metrics.to_dict().items() if k.startswith(("nmi", "ce", "cce"))})
    io.write_json(out / "report.json", report)
    print(f"{args.method}: k_rows={report['k_rows']} k_cols={report['k_cols']}", end="")
    if truth is not None:
        print(f" nmi_rows={report['nmi_rows']:.4f}", end="")
    print()
    return EXIT_OK


def _spec_with_overrides(args) -> ExperimentSpec:
    data = io.read_json(args.spec)
    if not isinstance(data, dict):
        return ExperimentSpec.from_dict(data)
    base = Path(args.spec).parent
    configs = []
    for ref in data.get("configs", []):
        if isinstance(ref, str) and not Path(ref).exists() and (base / ref).exists():
            ref = str(base / ref)
        configs.append(ref)
    if "configs" in data:
        data["configs"] = configs
    overrides = {
        "runs": args.runs,
        "base_seed": args.seed,
        "output_dir": args.out,
        "noise": args.noise_sigma,
        "step2": args.step2,
        "p": args.p,
        "epsilon": args.epsilon,
    }
    if args.method:
        overrides["methods"] = args.method
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.from_dict(data)


def cmd_bench(args) -> int:
    spec = _spec_with_overrides(args)
    summary = run_bench(spec)
    out = Path(spec.output_dir)
    failed = sum(cell["failed"] for cell in summary["cells"])
    print((out / "table1.csv").read_text(encoding="utf-8"), end="")
    print(f"wrote {out / 'table1.csv'}, {out / 'figure4.txt'}, {out / 'bench.json'} ({failed} failed runs)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    z_R, z_C = io.read_labels(args.true)
    h_R, h_C = io.read_labels(args.pred)
    report = {"nmi_rows": nmi(z_R, h_R), "ce_rows": clustering_error(z_R, h_R)}
    if z_C is not None and h_C is not None:
        report.update(nmi_cols=nmi(z_C, h_C), ce_cols=clustering_error(z_C, h_C), cce=cce(z_R, z_C, h_R, h_C))
    if args.out:
        io.write_json(args.out, report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rank1part", description="Partitioning through rank-one vectors and Potts denoising.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a latent block model dataset")
    g.add_argument("--config", required=True, help="preset name (D1-D4) or JSON file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise-sigma", type=float, default=None, help="add white noise of this standard deviation")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one extractor followed by Step 2")
    r.add_argument("matrix", help="matrix CSV file")
    r.add_argument("--method", choices=METHODS, required=True)
    r.add_argument("--step2", choices=STEP2, default="sorted_potts")
    r.add_argument("--p", type=int, choices=(1, 2), default=1)
    r.add_argument("--lambda", dest="lam", type=float, default=None, help="jump penalty (threshold for --step2 threshold)")
    r.add_argument("--epsilon", type=float, default=None, help="entropic regularization for ccot/ccot_gw")
    r.add_argument("--seed", type=int, default=0, help="seed for NMF restarts")
    r.add_argument("--labels", default=None, help="ground-truth labels (default: <matrix>.labels.csv when present)")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a benchmark described by a JSON spec")
    b.add_argument("spec", help="benchmark spec JSON")
    b.add_argument("--method", action="append", choices=METHODS, default=None, help="restrict methods (repeatable)")
    b.add_argument("--step2", choices=STEP2, default=None)
    b.add_argument("--p", type=int, choices=(1, 2), default=None)
    b.add_argument("--epsilon", type=float, default=None)
    b.add_argument("--noise-sigma", type=float, default=None)
    b.add_argument("--runs", type=int, default=None)
    b.add_argument("--seed", type=int, default=None, help="base seed")
    b.add_argument("--out", default=None, help="output directory")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("evaluate", help="compare two label files")
    e.add_argument("true", help="ground-truth labels file")
    e.add_argument("pred", help="predicted labels file")
    e.add_argument("--out", default=None, help="also write the metrics as JSON")
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Rank1Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
