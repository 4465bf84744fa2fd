"""Command-line entry point.

Staged subcommands operate on a run directory (--out): gen-data writes the
split dataset files, inject-noise corrupts the silver split, train-silver and
train-gold produce checkpoints and metrics, estimate writes the corruption
matrix CSVs. sweep and ablate orchestrate full experiment grids.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import datagen, estimator, harness, noise, svgplot
from .harness import ExperimentConfig, parse_config
from .metrics import evaluate
from .model import CorrectedMode, forward, init_model, load_model, save_model, train
from .noise import NoiseSpec
from .numerics import RandomStream


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    data = harness.prepare_data(cfg)
    datagen.write_dataset(data.full, out / "dataset_full.mlnl")
    datagen.write_dataset(data.test, out / "test.mlnl")
    datagen.write_dataset(data.gold, out / "gold.mlnl")
    datagen.write_dataset(data.silver_clean, out / "silver_clean.mlnl")
    datagen.write_dataset(data.singles_pool, out / "singles_pool.mlnl")
    (out / "resolved.cfg").write_text(harness.render_config(cfg), encoding="utf-8")
    print(f"generated N={data.full.n} K={data.full.num_classes} "
          f"gold={data.gold.n} silver={data.silver_clean.n} "
          f"singles_pool={data.singles_pool.n} test={data.test.n} -> {out}")
    return 0


def _cmd_inject_noise(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    eta = args.eta if args.eta is not None else cfg.etas[0]
    silver = datagen.read_dataset(out / "silver_clean.mlnl")
    root = RandomStream(cfg.seed)
    spec = NoiseSpec(eta, seed=root.derive_seed("noise"), mode=cfg.noise_mode)
    noisy, log = noise.inject(silver, spec)
    datagen.write_dataset(noisy, out / "silver_noisy.mlnl")
    true_c = noise.symmetric_matrix(silver.num_classes, eta)
    noise.write_matrix(true_c, out / "true_matrix.csv")
    emp, _ = noise.empirical_matrix(silver, noisy)
    noise.write_matrix(emp, out / "empirical_matrix.csv")
    with open(out / "flips.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample,from,to\n")
        for i, a, b in log.flips:
            fh.write(f"{i},{a},{b}\n")
    print(f"injected eta={eta!r}: {len(log)} flips over {silver.n} samples -> {out}")
    return 0


def _cmd_train_silver(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    noisy = datagen.read_dataset(out / "silver_noisy.mlnl")
    test_path = out / "test.mlnl"
    test = datagen.read_dataset(test_path) if test_path.exists() else None
    root = RandomStream(cfg.seed)
    layer_sizes = [noisy.num_features, *cfg.hidden, noisy.num_classes]
    f0 = init_model(layer_sizes, cfg.activation, cfg.silver.init_scale,
                    seed=root.derive_seed("silver-init"))
    train_cfg = dataclasses.replace(cfg.silver, seed=root.derive_seed("silver-train"))
    f, hist = train(f0, noisy, "asl", train_cfg, cfg.asl, eval_data=test)
    save_model(f, out / "silver_model.mlpm")
    harness.write_metrics_csv(out / "silver_metrics.csv", hist,
                               "test" if test is not None else "train")
    last = hist[-1].report
    print(f"silver model: {cfg.silver.epochs} epochs, final mAP={last.map:.4f} -> {out}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    method = args.method.replace("-", "_")
    if args.estimation_set:
        cfg.estimation_set = args.estimation_set
    if method == "true":
        eta = args.eta if args.eta is not None else cfg.etas[0]
        gold = datagen.read_dataset(out / "gold.mlnl")
        true_c = noise.symmetric_matrix(gold.num_classes, eta)
        noise.write_matrix(true_c, out / "chat.csv")
        print(f"true matrix for eta={eta!r} -> {out / 'chat.csv'}")
        return 0

    f = load_model(out / "silver_model.mlpm")
    gold = datagen.read_dataset(out / "gold.mlnl")
    if method == "galc_slr":
        pool = datagen.read_dataset(out / "singles_pool.mlnl")
        regs = estimator.compute_regulators(f, pool)
        est_set = gold if cfg.estimation_set == "gold" \
            else datagen.read_dataset(out / "silver_noisy.mlnl")
        report = estimator.estimate_galc_slr(f, est_set, regs)
        final_form = "raw" if args.no_final_sigmoid else cfg.correction_form
    elif method == "glc":
        report = estimator.estimate_glc(f, gold, cfg.glc_readout)
        final_form = "raw" if args.no_final_sigmoid else cfg.correction_form
    else:
        raise SystemExit(f"unknown estimation method {args.method!r}")
    estimator.write_report(report, out / "chat")
    final = harness.training_matrix(report, final_form)
    noise.write_matrix(final, out / "chat.csv")
    print(f"{method} estimate ({final_form}) -> {out / 'chat.csv'} "
          f"(fallback classes: {report.fallback_classes or 'none'})")
    return 0


def _cmd_train_gold(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    gold = datagen.read_dataset(out / "gold.mlnl")
    noisy = datagen.read_dataset(out / "silver_noisy.mlnl")
    test_path = out / "test.mlnl"
    test = datagen.read_dataset(test_path) if test_path.exists() else None
    combined = datagen.Dataset(
        np.concatenate([gold.features, noisy.features]),
        np.concatenate([gold.labels, noisy.labels]), tag="noisy")
    if args.correction == "none":
        mode = "asl"
    else:
        corr = noise.read_matrix(args.correction)
        mask = np.zeros(combined.n, dtype=bool)
        mask[:gold.n] = True
        mode = CorrectedMode(corr, mask)
    root = RandomStream(cfg.seed)
    layer_sizes = [combined.num_features, *cfg.hidden, combined.num_classes]
    g0 = init_model(layer_sizes, cfg.activation, cfg.gold.init_scale,
                    seed=root.derive_seed("gold-init"))
    train_cfg = dataclasses.replace(cfg.gold, seed=root.derive_seed("gold-train"))
    g, hist = train(g0, combined, mode, train_cfg, cfg.asl, eval_data=test)
    save_model(g, out / "gold_model.mlpm")
    harness.write_metrics_csv(out / "metrics.csv", hist,
                               "test" if test is not None else "train")
    last = hist[-1].report
    print(f"gold model (correction={args.correction}): final mAP={last.map:.4f} -> {out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    model = load_model(args.model)
    ds = datagen.read_dataset(args.data)
    scores = forward(model, ds.features).p_sig
    report = evaluate(scores, ds.labels)
    print(f"map={report.map!r} cf1={report.cf1!r} of1={report.of1!r}")
    out = _outdir(cfg)
    with open(out / "eval.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("map,cf1,of1\n")
        fh.write(f"{report.map!r},{report.cf1!r},{report.of1!r}\n")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    records = harness.run_sweep(cfg, cfg.out)
    for rec in records:
        print(f"{rec.method:12s} eta={rec.eta!r} mAP={rec.final.map:.4f} "
              f"({rec.wall_seconds:.1f}s)")
    print(f"summary -> {Path(cfg.out) / 'summary.csv'}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_config(args)
    records = harness.run_ablation(cfg, args.axis, cfg.out)
    for rec in records:
        print(f"{rec.method:12s} eta={rec.eta!r} mAP={rec.final.map:.4f}")
    return 0


def _cmd_plot(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    summary = Path(args.summary) if args.summary else out / "summary.csv"
    lines = summary.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:] if ln.strip()]
    by_method: dict[str, list[dict]] = {}
    for r in rows:
        by_method.setdefault(r["method"], []).append(r)
    for metric in ("map", "cf1", "of1"):
        series = [(m, [float(r["eta"]) for r in rs], [float(r[metric]) for r in rs])
                  for m, rs in by_method.items()]
        svgplot.emit_plot(series, "line", out / f"sweep_{metric}.svg",
                          title=f"{metric.upper()} vs noise ratio",
                          xlabel="noise ratio", ylabel=metric.upper())
    print(f"plots -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlnl",
        description="noise-robust multi-label classification lab")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", help="generate and split the synthetic dataset")
    p = sub.add_parser("inject-noise", help="corrupt the silver split")
    p.add_argument("--eta", type=float, help="noise ratio (default: first of noise.eta)")
    sub.add_parser("train-silver", help="train the silver classifier on noisy data")
    p = sub.add_parser("estimate", help="estimate the corruption matrix")
    p.add_argument("--method", required=True, choices=["galc-slr", "glc", "true"])
    p.add_argument("--estimation-set", choices=["gold", "silver"])
    p.add_argument("--no-final-sigmoid", action="store_true",
                   help="write the raw estimate as the final matrix")
    p.add_argument("--eta", type=float, help="noise ratio for --method true")
    p = sub.add_parser("train-gold", help="train the final classifier")
    p.add_argument("--correction", required=True,
                   help="correction matrix CSV path, or 'none' for the plain baseline")
    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    sub.add_parser("sweep", help="full grid over noise ratios and methods")
    p = sub.add_parser("ablate", help="ablation grid")
    p.add_argument("--axis", required=True, choices=["trusted", "limit"])
    p = sub.add_parser("plot", help="re-render sweep plots from a summary CSV")
    p.add_argument("--summary", help="summary.csv path (default: <out>/summary.csv)")
    return parser


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "inject-noise": _cmd_inject_noise,
    "train-silver": _cmd_train_silver,
    "estimate": _cmd_estimate,
    "train-gold": _cmd_train_gold,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "ablate": _cmd_ablate,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ValueError, RuntimeError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
