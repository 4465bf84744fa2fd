"""Corruption-matrix estimators.

GALC-SLR estimation: per-class regulator rows are the mean softmax prediction
of the silver classifier over clean single-label samples of that class. For
each class k, over estimation samples containing k, the sigmoid prediction is
corrected by subtracting the regulator rows of the co-present labels and
adding back that many copies of k's own regulator row, then averaged. The
accumulated matrix is the raw estimate; element-wise sigmoid of it is the
scaled estimate. On an all-single-label estimation set the regulator terms
vanish and the raw estimate degenerates to the per-class mean sigmoid
prediction (the GLC recipe on the sigmoid readout).

GLC baseline: row k is the mean readout (softmax by default) over trusted
samples whose label k is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .model import MlpModel, forward
from .noise import KIND_RAW, KIND_SCALED, CorruptionMatrix, write_matrix
from .numerics import logit, sigmoid


@dataclass(eq=False)
class RegulatorMatrix:
    """Per-class mean softmax rows plus the sample counts behind them."""

    matrix: np.ndarray        # (K, K); populated rows lie on the simplex
    counts: np.ndarray        # (K,) samples per class
    fallback_classes: list[int]  # classes with zero samples (uniform rows)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]


@dataclass(eq=False)
class EstimationReport:
    raw: CorruptionMatrix
    scaled: CorruptionMatrix
    counts: np.ndarray
    fallback_classes: list[int]

    @property
    def k(self) -> int:
        return self.raw.k


def compute_regulators(model: MlpModel, pool: Dataset) -> RegulatorMatrix:
    """Mean softmax prediction per class over a clean single-label pool."""
    if pool.n == 0:
        raise ValueError("single-label pool is empty")
    cards = pool.cardinalities()
    if not np.all(cards == 1):
        bad = int(np.argmax(cards != 1))
        raise ValueError(f"pool sample {bad} has {cards[bad]} positives; expected exactly 1")
    k = pool.num_classes
    soft = forward(model, pool.features).p_soft
    classes = pool.labels.argmax(axis=1)
    reg = np.full((k, k), 1.0 / k)
    counts = np.zeros(k, dtype=np.int64)
    fallback = []
    for c in range(k):
        rows = soft[classes == c]
        counts[c] = rows.shape[0]
        if counts[c] == 0:
            fallback.append(c)
        else:
            reg[c] = rows.sum(axis=0) / counts[c]
    return RegulatorMatrix(reg, counts, fallback)


def estimate_galc_slr(model: MlpModel, estimation_set: Dataset,
                      regulators: RegulatorMatrix) -> EstimationReport:
    """Regulator-corrected corruption estimate over a multi-label estimation set."""
    if estimation_set.n == 0:
        raise ValueError("estimation set is empty")
    k = estimation_set.num_classes
    if regulators.k != k:
        raise ValueError("regulator matrix does not match class count")
    sig = forward(model, estimation_set.features).p_sig
    y = estimation_set.labels.astype(np.float64)
    reg = regulators.matrix

    raw = np.zeros((k, k))
    counts = np.zeros(k, dtype=np.int64)
    fallback = []
    # For samples with class c positive:
    #   sum_i [ sig_i - (y_i @ reg - reg_c) + (card_i - 1) * reg_c ]
    reg_sums = y @ reg                      # per-sample sum of regulator rows of its labels
    cards = y.sum(axis=1)
    for c in range(k):
        mask = estimation_set.labels[:, c] == 1
        n_c = int(mask.sum())
        counts[c] = n_c
        if n_c == 0:
            fallback.append(c)
            raw[c] = logit(np.full(k, 1.0 / k))
            continue
        acc = sig[mask].sum(axis=0)
        acc -= reg_sums[mask].sum(axis=0) - n_c * reg[c]
        acc += (cards[mask] - 1.0).sum() * reg[c]
        raw[c] = acc / n_c
    scaled = sigmoid(raw)
    return EstimationReport(
        raw=CorruptionMatrix(raw, KIND_RAW),
        scaled=CorruptionMatrix(scaled, KIND_SCALED),
        counts=counts, fallback_classes=fallback)


def estimate_glc(model: MlpModel, gold: Dataset,
                 readout: str = "softmax") -> EstimationReport:
    """GLC baseline: per-class mean prediction over trusted samples."""
    if gold.n == 0:
        raise ValueError("gold set is empty")
    if readout not in ("softmax", "sigmoid"):
        raise ValueError(f"unknown readout {readout!r}")
    k = gold.num_classes
    out = forward(model, gold.features)
    pred = out.p_soft if readout == "softmax" else out.p_sig
    raw = np.zeros((k, k))
    counts = np.zeros(k, dtype=np.int64)
    fallback = []
    for c in range(k):
        mask = gold.labels[:, c] == 1
        counts[c] = int(mask.sum())
        if counts[c] == 0:
            fallback.append(c)
            raw[c] = 1.0 / k
        else:
            raw[c] = pred[mask].sum(axis=0) / counts[c]
    return EstimationReport(
        raw=CorruptionMatrix(raw, KIND_RAW),
        scaled=CorruptionMatrix(sigmoid(raw), KIND_SCALED),
        counts=counts, fallback_classes=fallback)


@dataclass(frozen=True)
class MatrixComparison:
    frobenius_distance: float
    mean_diagonal: float
    mean_offdiagonal: float
    diagonal_gap: float


def compare_matrices(a: CorruptionMatrix, b: CorruptionMatrix) -> MatrixComparison:
    """Distance of `a` from reference `b`, plus diagonal-contrast stats of `a`."""
    if a.k != b.k:
        raise ValueError(f"matrix sizes differ: {a.k} vs {b.k}")
    diff = a.matrix - b.matrix
    frob = float(np.sqrt(np.sum(diff * diff)))
    k = a.k
    diag = float(np.trace(a.matrix) / k)
    off = float((a.matrix.sum() - np.trace(a.matrix)) / (k * (k - 1))) if k > 1 else 0.0
    return MatrixComparison(frobenius_distance=frob, mean_diagonal=diag,
                            mean_offdiagonal=off, diagonal_gap=diag - off)


def write_report(report: EstimationReport, prefix) -> dict[str, str]:
    """Write `<prefix>_raw.csv`, `<prefix>_scaled.csv`, `<prefix>_info.txt`."""
    paths = {
        "raw": f"{prefix}_raw.csv",
        "scaled": f"{prefix}_scaled.csv",
        "info": f"{prefix}_info.txt",
    }
    write_matrix(report.raw, paths["raw"])
    write_matrix(report.scaled, paths["scaled"])
    lines = ["class,count,fallback"]
    for c in range(report.k):
        fb = "yes" if c in report.fallback_classes else "no"
        lines.append(f"{c},{int(report.counts[c])},{fb}")
    with open(paths["info"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return paths
