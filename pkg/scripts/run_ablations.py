"""Run both ablation grids at the fixed ablation noise ratio.

Trusted-fraction axis: {5%, 10%} x {estimated matrix, true matrix}.
Single-label budget axis: {L10, L50, unlimited} with the estimated matrix.
"""

import argparse

from mlnl.harness import ExperimentConfig, run_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eta", type=float, default=0.4)
    args = ap.parse_args()

    cfg = ExperimentConfig()
    cfg.seed = args.seed
    cfg.ablation_eta = args.eta

    for axis in ("trusted", "limit"):
        print(f"== axis: {axis} ==")
        for rec in run_ablation(cfg, axis, f"{args.out}/{axis}"):
            print(f"{rec.method:12s} mAP={rec.final.map:.4f} ({rec.wall_seconds:.1f}s)")


if __name__ == "__main__":
    main()
