"""Run the default desk-scale noise sweep (baseline vs corrected vs true matrix).

Writes summary.csv, per-run artifacts, and SVG plots under runs/sweep.
Equivalent to `mlnl sweep` with the default configuration.
"""

import argparse

from mlnl.harness import ExperimentConfig, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--etas", type=float, nargs="*", default=[0.0, 0.2, 0.4, 0.6])
    args = ap.parse_args()

    cfg = ExperimentConfig()
    cfg.seed = args.seed
    cfg.etas = tuple(args.etas)
    records = run_sweep(cfg, args.out)
    for rec in records:
        print(f"{rec.method:12s} eta={rec.eta:<4} mAP={rec.final.map:.4f} "
              f"CF1={rec.final.cf1:.4f} OF1={rec.final.of1:.4f} "
              f"({rec.wall_seconds:.1f}s)")


if __name__ == "__main__":
    main()
