"""Grid-search estimation-quality configurations.

For each candidate data/training config, trains the silver classifier on noisy
data and compares the regulator-based estimate against the GLC baseline over
several seeds: Frobenius distance of the raw estimates to the true matrix, and
diagonal contrast of each estimate. Used to pick the frozen settings of the
estimator-quality acceptance experiment.
"""

import argparse
import itertools
import time

import numpy as np

from mlnl import datagen, estimator, noise
from mlnl.datagen import GenConfig, SplitSpec
from mlnl.estimator import compare_matrices
from mlnl.model import AslParams, TrainConfig, init_model, train
from mlnl.numerics import RandomStream


def one_seed(seed, *, n, mean_labels, imbalance, correlation, gamma_minus,
             epochs, glc_readout, trusted_fraction, eta=0.4, k=8, d=32):
    root = RandomStream(seed)
    gen = GenConfig(n=n, d=d, k=k, mean_labels_per_sample=mean_labels,
                    feature_noise_sigma=0.8, imbalance_exponent=imbalance,
                    correlation_strength=correlation, seed=root.derive_seed("datagen"))
    full = datagen.generate(gen)
    multi, singles = datagen.strip_single_label(full)
    gold, silver = datagen.split_gold_silver(
        multi, SplitSpec(trusted_fraction, seed=root.derive_seed("split")))
    noisy, _ = noise.inject(silver, noise.NoiseSpec(eta, seed=root.derive_seed("noise")))
    true_c = noise.symmetric_matrix(k, eta)

    asl = AslParams(gamma_minus=gamma_minus, margin=0.05 if gamma_minus else 0.0)
    f0 = init_model([d, 64, k], "tanh", 1.0, seed=root.derive_seed("init"))
    cfg = TrainConfig(epochs=epochs, batch_size=64, lr=2e-3, optimizer="adam",
                      seed=root.derive_seed("train"))
    f, _ = train(f0, noisy, "asl", cfg, asl)

    regs = estimator.compute_regulators(f, singles)
    rep_g = estimator.estimate_galc_slr(f, gold, regs)
    rep_b = estimator.estimate_glc(f, gold, glc_readout)

    cg = compare_matrices(rep_g.raw, true_c)
    cb = compare_matrices(rep_b.raw, true_c)
    return cg.frobenius_distance, cb.frobenius_distance, cg.diagonal_gap, cb.diagonal_gap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n", type=int, default=8000)
    ap.add_argument("--epochs", type=int, default=25)
    args = ap.parse_args()

    grid = list(itertools.product(
        [2.0, 2.2],              # mean labels per sample
        [1.5, 2.5],              # imbalance exponent
        [0.8, 1.0],              # correlation strength
        [0.0, 4.0],              # negative focusing parameter
        ["softmax", "sigmoid"],  # GLC readout
    ))
    for mean_labels, imb, corr, gm, readout in grid:
        t0 = time.perf_counter()
        frob_wins = gap_wins = 0
        rows = []
        for seed in range(args.seeds):
            fg, fb, gg, gb = one_seed(
                1000 + seed, n=args.n, mean_labels=mean_labels, imbalance=imb,
                correlation=corr, gamma_minus=gm, epochs=args.epochs,
                glc_readout=readout, trusted_fraction=0.10)
            frob_wins += fg <= fb
            gap_wins += gg > gb
            rows.append((fg, fb, gg, gb))
        dt = time.perf_counter() - t0
        mean = np.mean(rows, axis=0)
        print(f"ml={mean_labels} imb={imb} corr={corr} gm={gm} glc={readout:7s} "
              f"| frob {mean[0]:.2f} vs {mean[1]:.2f} (wins {frob_wins}/{args.seeds}) "
              f"| gap {mean[2]:.2f} vs {mean[3]:.2f} (wins {gap_wins}/{args.seeds}) "
              f"| {dt:.0f}s", flush=True)


if __name__ == "__main__":
    main()
