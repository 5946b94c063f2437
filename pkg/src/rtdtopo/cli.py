"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
input files), 3 numeric failure (malformed comparison, failed gradient
check).  Machine-readable results go to stdout, progress and warnings to
stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .divergence import DivergenceError, cross_barcode, mtop_div, rtd_score
from .fewshot import (
    TrainConfig,
    evaluate,
    gen_synthetic,
    lambda_search,
    train,
    TaskResidualModel,
)
from .geometry import PointCloud, build_vr_filtration, pairwise_distances
from .gradient import rtd_subgradient
from .io import (
    RunManifest,
    barcode_rows,
    load_base_classifier,
    load_embeddings,
    load_manifest,
    load_point_cloud,
    load_residual_csv,
    save_manifest,
    write_base_classifier,
    write_embeddings,
    write_metrics_csv,
    write_report_json,
    write_residual_csv,
)
from .persistence import compute_persistence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _configure_threads() -> None:
    raw = os.environ.get("RTD_TOPO_THREADS", "").strip()
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        print(f"error: RTD_TOPO_THREADS must be an integer >= 0, got {raw!r}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None
    if n < 0:
        print(f"error: RTD_TOPO_THREADS must be an integer >= 0, got {raw!r}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    if n == 0:
        return  # auto
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _emit_barcode(bc, out: str | None) -> None:
    rows = barcode_rows(bc)
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["dim", "birth", "death"])
        for row in rows:
            w.writerow(row)
    finally:
        if out:
            fh.close()


def _cmd_barcode(args) -> int:
    cloud = load_point_cloud(args.points)
    fc = build_vr_filtration(pairwise_distances(cloud), max_dim=args.max_dim)
    bc = compute_persistence(fc)
    _emit_barcode(bc, args.output)
    return EXIT_OK


def _cmd_rtd(args) -> int:
    a = load_point_cloud(args.cloud_a)
    b = load_point_cloud(args.cloud_b)
    report = rtd_score(a, b)
    if args.json:
        payload = {
            "score": report.score,
            "intervals_fwd": len(report.barcode_fwd.pairs),
            "intervals_bwd": len(report.barcode_bwd.pairs),
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print(repr(report.score))
    return EXIT_OK


def _cmd_crossbarcode(args) -> int:
    p = load_point_cloud(args.cloud_p)
    q = load_point_cloud(args.cloud_q)
    if args.score:
        print(repr(mtop_div(p, q)))
    else:
        _emit_barcode(cross_barcode(p, q), args.output)
    return EXIT_OK


def _cmd_grad_check(args) -> int:
    a = load_point_cloud(args.cloud_a)
    b = load_point_cloud(args.cloud_b)
    rng = np.random.default_rng(args.seed)
    grad, _ = rtd_subgradient(a, b)
    flat = np.concatenate([grad.grad_p.ravel(), grad.grad_pt.ravel()])
    h = args.step
    worst = 0.0
    for _ in range(args.directions):
        u = rng.standard_normal(flat.shape[0])
        u /= np.linalg.norm(u)
        ua = u[: a.points.size].reshape(a.points.shape)
        ub = u[a.points.size :].reshape(b.points.shape)
        f_plus = rtd_score(PointCloud(a.points + h * ua), PointCloud(b.points + h * ub)).score
        f_minus = rtd_score(PointCloud(a.points - h * ua), PointCloud(b.points - h * ub)).score
        fd = (f_plus - f_minus) / (2 * h)
        an = float(flat @ u)
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-12)
        worst = max(worst, rel)
    status = "PASS" if worst <= args.tol else "FAIL"
    print(f"{status} max_rel_err={worst!r} directions={args.directions}")
    return EXIT_OK if status == "PASS" else EXIT_NUMERIC


def _cmd_gen_synthetic(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds, base = gen_synthetic(
        class_count=args.classes,
        shots=args.shots,
        test_per_class=args.test_per_class,
        dim=args.dim,
        cluster_spread=args.spread,
        modality_gap=args.gap,
        seed=args.seed,
    )
    write_embeddings(train_ds, out / "train.csv")
    write_embeddings(test_ds, out / "test.csv")
    write_base_classifier(base, out / "base.csv")
    config = TrainConfig(
        shots=args.shots,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
    )
    manifest = RunManifest(
        train_csv=Path("train.csv"),
        test_csv=Path("test.csv"),
        base_csv=Path("base.csv"),
        output_dir=Path("."),
        config=config,
    )
    save_manifest(manifest, out / "run.json")
    print(str(out / "run.json"))
    return EXIT_OK


def _load_run(manifest_path: str):
    manifest = load_manifest(manifest_path)
    train_ds = load_embeddings(manifest.train_csv, split="train")
    base = load_base_classifier(manifest.base_csv)
    if train_ds.class_count != base.class_count:
        train_ds = replace(train_ds, class_count=base.class_count)
    test_ds = load_embeddings(manifest.test_csv, split="test", class_count=base.class_count)
    return manifest, train_ds, test_ds, base


def _cmd_lambda_search(args) -> int:
    manifest, train_ds, _, base = _load_run(args.manifest)
    result = lambda_search(train_ds, base, manifest.config)
    if result.degenerate:
        print("divergence is zero at initialisation; weight set to 0", file=sys.stderr)
    if args.json:
        payload = {
            "lambda": result.lam,
            "degenerate": result.degenerate,
            "mean_ce": result.mean_ce,
            "mean_div": result.mean_div,
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        print(repr(result.lam))
    return EXIT_OK


def _cmd_train(args) -> int:
    manifest, train_ds, test_ds, base = _load_run(args.manifest)
    config = manifest.config
    degenerate = False
    if config.lam is None:
        result = lambda_search(train_ds, base, config)
        degenerate = result.degenerate
        config = replace(config, lam=result.lam)
    model, history = train(train_ds, base, config)
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(history, out / "metrics.csv")
    write_residual_csv(model.residual, out / "residual.csv")
    report = {
        "lambda": config.lam,
        "lambda_degenerate": degenerate,
        "epochs": config.epochs,
        "seed": config.seed,
        "initial_l_ce": history[0].l_ce if history else None,
        "final_l_ce": history[-1].l_ce if history else None,
        "initial_l_div": history[0].l_div if history else None,
        "final_l_div": history[-1].l_div if history else None,
        "final_train_acc": history[-1].train_acc if history else None,
        "test_acc": evaluate(model, test_ds),
    }
    write_report_json(report, out / "report.json")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _cmd_eval(args) -> int:
    manifest, _, test_ds, base = _load_run(args.manifest)
    if args.residual:
        residual = load_residual_csv(args.residual)
    else:
        default = manifest.output_dir / "residual.csv"
        residual = load_residual_csv(default) if default.exists() else np.zeros_like(base.weights)
    model = TaskResidualModel(
        base=base,
        residual=residual,
        alpha=manifest.config.alpha,
        logit_scale=manifest.config.logit_scale,
    )
    print(repr(evaluate(model, test_ds)))
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="rtdtopo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("barcode", help="persistence barcode of a point cloud")
    p.add_argument("points")
    p.add_argument("--max-dim", type=int, choices=(1, 2), default=2)
    p.add_argument("--output", help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_barcode)

    p = sub.add_parser("rtd", help="topology divergence between two matched clouds")
    p.add_argument("cloud_a")
    p.add_argument("cloud_b")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_rtd)

    p = sub.add_parser("crossbarcode", help="barcode of one cloud relative to another")
    p.add_argument("cloud_p")
    p.add_argument("cloud_q")
    p.add_argument("--output", help="write CSV here instead of stdout")
    p.add_argument("--score", action="store_true", help="print the length sum only")
    p.set_defaults(func=_cmd_crossbarcode)

    p = sub.add_parser("grad-check", help="finite-difference check of the divergence gradient")
    p.add_argument("cloud_a")
    p.add_argument("cloud_b")
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_grad_check)

    p = sub.add_parser("gen-synthetic", help="write a synthetic few-shot dataset")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--shots", type=int, default=16)
    p.add_argument("--test-per-class", type=int, default=50)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--spread", type=float, default=0.25)
    p.add_argument("--gap", type=float, default=0.25)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("lambda-search", help="choose the divergence weight for a run")
    p.add_argument("--manifest", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_lambda_search)

    p = sub.add_parser("train", help="train a task residual from a run manifest")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="accuracy of a trained or zero residual")
    p.add_argument("--manifest", required=True)
    p.add_argument("--residual", help="residual CSV (default: output_dir/residual.csv)")
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_threads()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
