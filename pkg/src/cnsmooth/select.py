"""Choosing informative points and tuning parameters.

For every ``(k, lam)`` on the grid the kNN graph is built once, candidate
points (local maxima of in-degree) are found, and their resolvent columns
are solved once. Every cluster count ``K`` then reuses those columns: the
greedy choice of informative points, the closed-form assignment and the
clarity criterion. The configuration with the largest ``C / R`` wins.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .chain import (
    ResolventCache,
    SoftAssignment,
    final_solution,
    hard_labels,
)
from .data import DataMatrix, LabelVector
from .errors import SelectionError
from .graph import DistanceMetric, TransitionMatrix, build_knn_graph, nearest_neighbors

DEFAULT_CAP = 300
DEFAULT_KMAX = 30


@dataclass(frozen=True)
class CandidateSet:
    """Candidate informative points in ascending index order.

    ``scores`` holds ``||W[:, i]||_1 * (distance to the nearest other
    candidate)``, the ranking used to cap the set.
    """

    indices: np.ndarray
    scores: np.ndarray
    capped: bool = False

    def __len__(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class SelectionScores:
    s: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class ModelConfig:
    lam: float
    k: int
    K: int
    metric: DistanceMetric
    selected: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise SelectionError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.k < 1 or self.K < 1:
            raise SelectionError("k and K must be positive")

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "k": self.k,
            "K": self.K,
            "metric": self.metric.value,
            "selected": [int(i) for i in self.selected],
        }


@dataclass(frozen=True)
class CriterionReport:
    C: float
    R: float
    score: float
    mean_final_max: float
    initial_reference: float

    def as_dict(self) -> dict:
        return {
            "C": self.C,
            "R": self.R,
            "score": self.score,
            "mean_final_max": self.mean_final_max,
            "initial_reference": self.initial_reference,
        }


@dataclass(frozen=True)
class GridEntry:
    """One row of the criterion table."""

    metric: DistanceMetric
    k: int
    lam: float
    K: int
    report: CriterionReport
    effective_clusters: int

    def row(self) -> dict:
        return {
            "metric": self.metric.value,
            "k": self.k,
            "lambda": self.lam,
            "K": self.K,
            "C": self.report.C,
            "R": self.report.R,
            "score": self.report.score,
            "effective_clusters": self.effective_clusters,
        }


TABLE_COLUMNS = ("metric", "k", "lambda", "K", "C", "R", "score", "effective_clusters")


@dataclass(frozen=True)
class ClusterResult:
    labels: LabelVector
    soft: SoftAssignment
    config: ModelConfig
    report: CriterionReport
    effective_clusters: int
    warnings: tuple = ()


@dataclass
class GridSearchOutcome:
    best: ModelConfig
    result: ClusterResult
    table: list
    k_grid: list
    lambda_grid: list
    candidate_counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``best, result, table = grid_search(...)``
        return iter((self.best, self.result, self.table))


def candidate_set(
    W: TransitionMatrix,
    data: DataMatrix,
    k: Optional[int] = None,
    metric: Union[str, DistanceMetric] = DistanceMetric.EUCLIDEAN,
    cap: int = DEFAULT_CAP,
) -> CandidateSet:
    """Points whose in-degree is at least that of each of their neighbours.

    If more than ``cap`` qualify, the ``cap`` with largest score are kept
    (ties to the lower index).
    """
    if k is not None and k != W.k:
        raise SelectionError(f"graph was built with k={W.k}, not {k}")
    if cap < 1:
        raise SelectionError(f"cap must be positive, got {cap}")
    deg = W.in_degree
    local_max = deg >= deg[W.neighbors].max(axis=1)
    idx = np.flatnonzero(local_max)
    # the global maximum of the in-degree always qualifies
    assert idx.size >= 1
    if idx.size == 1:
        scores = np.array([np.inf])
    else:
        _, nearest = nearest_neighbors(data.values[idx], 1, metric)
        scores = W.col_l1[idx] * nearest[:, 0]
    capped = idx.size > cap
    if capped:
        keep = np.lexsort((idx, -scores))[:cap]
        keep.sort()
        idx, scores = idx[keep], scores[keep]
    return CandidateSet(idx, scores, capped)


def selection_scores(columns: Sequence) -> SelectionScores:
    """Column sums ``s`` and the Gram matrix ``c`` of the resolvent columns,
    with ``+inf`` on the diagonal so nothing is picked twice."""
    lams = {col.lam for col in columns}
    if len(lams) > 1:
        raise SelectionError("resolvent columns were computed for different lambdas")
    C = np.column_stack([col.values for col in columns])
    s = C.sum(axis=0)
    c = C.T @ C
    np.fill_diagonal(c, np.inf)
    return SelectionScores(s, c)


def select_informative(scores: SelectionScores, candidates: CandidateSet, K: int) -> list:
    """Greedy choice of ``K`` informative points.

    The first maximises ``s_j``; each later one minimises
    ``max_l c[j, l] / s_j**2`` over the points already chosen. Ties go to
    the earlier candidate. Returns point indices in selection order.
    """
    m = len(candidates)
    if K < 1:
        raise SelectionError(f"K must be positive, got {K}")
    if K > m:
        raise SelectionError(f"K={K} exceeds the {m} available candidates")
    s, c = scores.s, scores.c
    chosen = [int(np.argmax(s))]
    worst = c[chosen[0]].copy()
    for _ in range(1, K):
        j = int(np.argmin(worst / s**2))
        chosen.append(j)
        np.maximum(worst, c[j], out=worst)
    return [int(candidates.indices[j]) for j in chosen]


def initial_reference(n: int, K: int) -> float:
    """Mean row maximum of the initial assignment."""
    return (n - K + K * K) / (n * K)


def reference_R(lam: float, k: int, n: int) -> float:
    return (1.0 - lam) * (1.0 / n + 1.0 / k - 2.0 / math.sqrt(n * k))


def criterion(F_inf: SoftAssignment, lam: float, k: int, n: int, K: int) -> CriterionReport:
    """Clarity gain ``C`` over the initial assignment, its idealised
    reference ``R`` and the selection score ``C / R``."""
    if F_inf.values.shape != (n, K):
        raise SelectionError(f"assignment has shape {F_inf.values.shape}, expected ({n}, {K})")
    R = reference_R(lam, k, n)
    if not (k < n and lam < 1.0) or R <= 0.0:
        raise SelectionError(f"reference degenerate: R={R} for k={k}, n={n}, lambda={lam}")
    mean_max = float(F_inf.values.max(axis=1).mean())
    ref = initial_reference(n, K)
    C = mean_max - ref
    return CriterionReport(C, R, C / R, mean_max, ref)


def idealized_limits(lam: float, k: int, K: int, j: int = 0) -> tuple:
    """Limiting rows for an ordinary member and for the informative member of
    cluster ``j`` when every member has the informative point among its
    ``k`` neighbours."""
    e = np.zeros(K)
    e[j] = 1.0
    member = (1.0 - lam) / k * e + (k - 1 + lam) / (k * K)
    informative = (1.0 + lam * (k - 1)) / k * e + (1.0 - lam) * (k - 1) / (k * K)
    return member, informative


def idealized_improvement(lam: float, k: int, K: int, n: int) -> float:
    return (1.0 - lam) * (1.0 / n + 1.0 / k - 1.0 / (k * K) - K / n)


def default_k_grid(n: int) -> list:
    base = math.floor(math.log(n))
    return sorted({min(max(m * base, 1), n - 1) for m in range(1, 5)})


def default_lambda_grid(n: int) -> list:
    return [m / math.sqrt(n) for m in range(1, 6) if m / math.sqrt(n) < 1.0]


def _check_grids(n: int, k_grid, lambda_grid, K_max: int):
    k_grid = default_k_grid(n) if k_grid is None else sorted({int(k) for k in k_grid})
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(n)
        if not lambda_grid:
            raise SelectionError(
                f"default lambda grid is empty for n={n}; pass an explicit lambda grid"
            )
    else:
        lambda_grid = sorted({float(v) for v in lambda_grid})
    if not k_grid:
        raise SelectionError("k grid is empty")
    if not lambda_grid:
        raise SelectionError("lambda grid is empty; pass an explicit lambda grid")
    bad_k = [k for k in k_grid if not 1 <= k <= n - 1]
    if bad_k:
        raise SelectionError(f"k values {bad_k} outside [1, {n - 1}]")
    bad_l = [v for v in lambda_grid if not 0.0 < v < 1.0]
    if bad_l:
        raise SelectionError(f"lambda values {bad_l} outside (0, 1)")
    if K_max < 2:
        raise SelectionError(f"K_max must be at least 2, got {K_max}")
    return k_grid, lambda_grid


def grid_search(
    data: DataMatrix,
    metric: Union[str, DistanceMetric] = DistanceMetric.EUCLIDEAN,
    k_grid: Optional[Sequence[int]] = None,
    lambda_grid: Optional[Sequence[float]] = None,
    K_max: int = DEFAULT_KMAX,
    cap: int = DEFAULT_CAP,
    tol: float = 1e-10,
    solver: str = "fixed-point",
) -> GridSearchOutcome:
    """Fit every ``(k, lam, K)`` and keep the one maximising ``C / R``.

    ``None`` grids mean the defaults: ``k`` in ``m * floor(log n)`` for
    ``m = 1..4`` (clamped to ``[1, n - 1]``) and ``lam`` in
    ``m / sqrt(n)`` for ``m = 1..5`` (values ``>= 1`` dropped). ``K`` runs
    from 2 to ``min(K_max, number of candidates)``. Exact score ties go to
    smaller ``K``, then larger ``k``, then larger ``lam``.

    The returned table is sorted by ``(k, lam, K)``.
    """
    metric = DistanceMetric.coerce(metric)
    n = data.n
    k_grid, lambda_grid = _check_grids(n, k_grid, lambda_grid, K_max)
    timings = {"graph": 0.0, "candidates": 0.0, "solve": 0.0, "select": 0.0}
    table = []
    counts = {}
    best_key = None
    best = None
    for k in k_grid:
        t0 = time.perf_counter()
        W = build_knn_graph(data, k, metric)
        t1 = time.perf_counter()
        cands = candidate_set(W, data, k, metric, cap)
        timings["graph"] += t1 - t0
        timings["candidates"] += time.perf_counter() - t1
        for lam in lambda_grid:
            counts[(k, lam)] = len(cands)
            K_hi = min(K_max, len(cands))
            if K_hi < 2:
                continue
            t0 = time.perf_counter()
            cache = ResolventCache(W, lam, tol, solver)
            columns = cache.get(cands.indices)
            t1 = time.perf_counter()
            scores = selection_scores(columns)
            # greedy picks for K are a prefix of those for K_hi
            order = select_informative(scores, cands, K_hi)
            for K in range(2, K_hi + 1):
                sel = order[:K]
                F = final_solution(W, lam, sel, cache.get(sel))
                rep = criterion(F, lam, k, n, K)
                labels = hard_labels(F)
                table.append(GridEntry(metric, k, lam, K, rep, labels.effective))
                key = (-rep.score, K, -k, -lam)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (ModelConfig(lam, k, K, metric, tuple(sel)), F, rep, labels)
            timings["solve"] += t1 - t0
            timings["select"] += time.perf_counter() - t1
    if best is None:
        raise SelectionError(
            "no configuration has at least 2 candidate points; "
            "the range of cluster counts is empty"
        )
    config, F, rep, labels = best
    result = ClusterResult(labels, F, config, rep, labels.effective, data.warnings)
    table.sort(key=lambda e: (e.k, e.lam, e.K))
    return GridSearchOutcome(config, result, table, k_grid, lambda_grid, counts, timings)
