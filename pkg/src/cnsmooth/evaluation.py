"""External agreement between a clustering and ground-truth groups."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln

from .data import LabelVector
from .errors import EvaluationError

Labels = Union[LabelVector, np.ndarray, list]


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    ari: float
    ami: float

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "ari": self.ari, "ami": self.ami}

    def table(self) -> str:
        """Values x100 with two decimals."""
        return (
            f"{'accuracy':>10} {'ARI':>8} {'AMI':>8}\n"
            f"{100 * self.accuracy:10.2f} {100 * self.ari:8.2f} {100 * self.ami:8.2f}"
        )


def _as_array(labels: Labels) -> np.ndarray:
    if isinstance(labels, LabelVector):
        return labels.labels
    return np.asarray(labels)


def contingency(truth: Labels, pred: Labels) -> ContingencyTable:
    """Counts of each (truth class, predicted cluster) pair. Labels are
    re-coded densely in sorted order, so unused codes get no row/column."""
    t, p = _as_array(truth), _as_array(pred)
    if t.shape != p.shape or t.ndim != 1:
        raise EvaluationError(f"label vectors differ in length: {t.size} vs {p.size}")
    _, ti = np.unique(t, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    G = ti.max() + 1 if ti.size else 0
    K = pi.max() + 1 if pi.size else 0
    counts = np.zeros((G, K), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return ContingencyTable(counts)


def accuracy(table: ContingencyTable) -> float:
    """Fraction correct under the best one-to-one matching of clusters to
    classes. Surplus clusters (or classes) are matched to nothing."""
    n = table.total
    if n == 0:
        return 0.0
    G, K = table.counts.shape
    size = max(G, K)
    square = np.zeros((size, size), dtype=np.int64)
    square[:G, :K] = table.counts
    rows, cols = linear_sum_assignment(square, maximize=True)
    return float(square[rows, cols].sum()) / n


def _comb2(x) -> int:
    x = np.asarray(x, dtype=object)
    return int(sum(v * (v - 1) // 2 for v in x.ravel()))


def ari(table: ContingencyTable) -> float:
    """Adjusted Rand index; 0 when both partitions are trivial."""
    n = table.total
    if n < 2:
        raise EvaluationError("adjusted Rand index needs at least 2 observations")
    index = _comb2(table.counts)
    sum_a = _comb2(table.row_sums)
    sum_b = _comb2(table.col_sums)
    pairs = n * (n - 1) // 2
    expected = sum_a * sum_b / pairs
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0:
        return 0.0
    return (index - expected) / denom


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def mutual_information(table: ContingencyTable) -> float:
    N = table.total
    a, b = table.row_sums, table.col_sums
    g, k = np.nonzero(table.counts)
    nij = table.counts[g, k].astype(float)
    return float((nij / N * (np.log(N * nij) - np.log(a[g] * b[k].astype(float)))).sum())


def expected_mutual_information(table: ContingencyTable) -> float:
    """Expected mutual information when both sets of marginals are fixed and
    the pairing is uniformly random (hypergeometric cell counts)."""
    N = table.total
    a = table.row_sums[table.row_sums > 0]
    b = table.col_sums[table.col_sums > 0]
    lg = gammaln(np.arange(N + 2, dtype=float))  # lg[x] = log((x - 1)!)
    emi = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - N)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            log_p = (
                lg[ai + 1] + lg[bj + 1] + lg[N - ai + 1] + lg[N - bj + 1]
                - lg[N + 1] - lg[nij + 1] - lg[ai - nij + 1] - lg[bj - nij + 1]
                - lg[N - ai - bj + nij + 1]
            )
            term = nij / N * (np.log(N * nij) - np.log(float(ai) * bj))
            emi += float((term * np.exp(log_p)).sum())
    return emi


def _same_partition(counts: np.ndarray) -> bool:
    nz = counts > 0
    return bool((nz.sum(axis=0) == 1).all() and (nz.sum(axis=1) == 1).all())


def ami(table: ContingencyTable) -> float:
    """Adjusted mutual information normalised by the larger entropy."""
    if table.total < 2:
        raise EvaluationError("adjusted mutual information needs at least 2 observations")
    counts = table.counts[table.row_sums > 0][:, table.col_sums > 0]
    if _same_partition(counts):
        return 1.0
    table = ContingencyTable(counts)
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    norm = max(_entropy(table.row_sums), _entropy(table.col_sums))
    num, den = mi - emi, norm - emi
    if den <= 1e-12:
        return 0.0
    return num / den


def evaluate(truth: Labels, pred: Labels) -> MetricReport:
    table = contingency(truth, pred)
    return MetricReport(accuracy(table), ari(table), ami(table))
