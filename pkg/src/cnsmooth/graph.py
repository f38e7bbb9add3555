"""Exact k-nearest-neighbour transition matrices.

Neighbour order is the lexicographic order of (distance, index), and a point
is never its own neighbour. Small inputs use an all-pairs scan; larger ones
use a KD-tree to shortlist neighbours, which are then re-ranked with the same
distance arithmetic the all-pairs scan uses, so both routes agree exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .data import DataMatrix
from .errors import GraphError

BRUTE_FORCE_MAX_N = 1500
_BLOCK_ELEMENTS = 1 << 20


class DistanceMetric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"

    @classmethod
    def coerce(cls, metric: Union[str, "DistanceMetric"]) -> "DistanceMetric":
        try:
            return cls(metric)
        except ValueError:
            raise GraphError(f"unknown metric {metric!r}; use 'euclidean' or 'cosine'") from None


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic kNN weight matrix with ``k`` weights of ``1/k`` per row.

    ``neighbors[i]`` holds the neighbour indices of point ``i`` in ascending
    index order.
    """

    neighbors: np.ndarray
    k: int

    def __post_init__(self):
        nb = np.ascontiguousarray(self.neighbors, dtype=np.int64)
        if nb.ndim != 2 or nb.shape[1] != self.k:
            raise GraphError(f"neighbour array must have shape (n, {self.k}), got {nb.shape}")
        nb.flags.writeable = False
        object.__setattr__(self, "neighbors", nb)

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    @cached_property
    def in_degree(self) -> np.ndarray:
        deg = np.bincount(self.neighbors.ravel(), minlength=self.n)
        deg.flags.writeable = False
        return deg

    @property
    def col_l1(self) -> np.ndarray:
        """Column L1 norms of W, i.e. in-degree / k."""
        return self.in_degree / self.k

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n, k = self.neighbors.shape
        data = np.full(n * k, 1.0 / k)
        indptr = np.arange(0, n * k + 1, k)
        return sp.csr_matrix((data, self.neighbors.ravel(), indptr), shape=(n, n))

    def dense(self) -> np.ndarray:
        return self.csr.toarray()

    def dump(self, fh: IO[str]) -> None:
        """Write ``row col weight`` triplets, row-major sorted."""
        w = repr(1.0 / self.k)
        for i, row in enumerate(self.neighbors):
            for j in row:
                fh.write(f"{i} {j} {w}\n")


def _unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.sqrt((X * X).sum(axis=1))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise GraphError(
            f"cosine distance undefined: observation {zero[0]} has zero norm"
        )
    return X / norms[:, None]


def _pair_keys(Q: np.ndarray, C: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    """Ranking keys between rows of ``Q`` (m, d) and ``C`` (m, c, d) or (c, d).

    Squared Euclidean distance, or cosine distance on unit-normalised rows.
    Both search routes call this so their arithmetic is identical.
    """
    if metric is DistanceMetric.EUCLIDEAN:
        diff = Q[:, None, :] - C
        return (diff * diff).sum(axis=-1)
    return 1.0 - (Q[:, None, :] * C).sum(axis=-1)


def _brute(Y: np.ndarray, rows: np.ndarray, k: int, metric: DistanceMetric):
    n, d = Y.shape
    block = max(1, _BLOCK_ELEMENTS // max(n * d, 1))
    idx = np.empty((rows.size, k), dtype=np.int64)
    keys = np.empty((rows.size, k))
    for start in range(0, rows.size, block):
        r = rows[start:start + block]
        D = _pair_keys(Y[r], Y, metric)
        D[np.arange(r.size), r] = np.inf
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        idx[start:start + r.size] = order
        keys[start:start + r.size] = np.take_along_axis(D, order, axis=1)
    return idx, keys


def _tree_radius(key: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    # map a ranking key onto the Euclidean scale the tree searches in
    if metric is DistanceMetric.EUCLIDEAN:
        return np.sqrt(np.maximum(key, 0.0))
    return np.sqrt(np.maximum(2.0 * key, 0.0))


def _tree_chunk(tree, Y, r, k, q, metric):
    tdist, tidx = tree.query(Y[r], k=q)
    cand_keys = _pair_keys(Y[r], Y[tidx], metric)
    cand_keys[tidx == r[:, None]] = np.inf
    order = np.lexsort((tidx, cand_keys), axis=-1)[:, :k]
    got_idx = np.take_along_axis(tidx, order, axis=1)
    got_keys = np.take_along_axis(cand_keys, order, axis=1)
    # anything the tree did not return lies at tree distance >= tdist[:, -1]
    kth = _tree_radius(got_keys[:, -1], metric)
    safe = kth < tdist[:, -1] * (1.0 - 1e-9) - 1e-12
    return got_idx, got_keys, safe


def _tree(Y: np.ndarray, rows: np.ndarray, k: int, metric: DistanceMetric):
    n, d = Y.shape
    tree = cKDTree(Y)
    idx = np.empty((rows.size, k), dtype=np.int64)
    keys = np.empty((rows.size, k))
    pending = np.arange(rows.size)
    pad = max(4, k // 2)
    while pending.size:
        q = k + 1 + pad
        if q >= n:
            idx[pending], keys[pending] = _brute(Y, rows[pending], k, metric)
            break
        block = max(1, _BLOCK_ELEMENTS // (q * d))
        unresolved = []
        for start in range(0, pending.size, block):
            p = pending[start:start + block]
            got_idx, got_keys, safe = _tree_chunk(tree, Y, rows[p], k, q, metric)
            idx[p[safe]] = got_idx[safe]
            keys[p[safe]] = got_keys[safe]
            unresolved.append(p[~safe])
        pending = np.concatenate(unresolved)
        pad *= 2
    return idx, keys


def _prepare(data: Union[DataMatrix, np.ndarray], metric: DistanceMetric) -> np.ndarray:
    X = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=float)
    return _unit_rows(X) if metric is DistanceMetric.COSINE else np.ascontiguousarray(X)


def nearest_neighbors(
    data: Union[DataMatrix, np.ndarray],
    k: int,
    metric: Union[str, DistanceMetric] = DistanceMetric.EUCLIDEAN,
    rows: Optional[Sequence[int]] = None,
    method: str = "auto",
):
    """Exact neighbours of ``rows`` (default: every point).

    Returns ``(indices, distances)``, both ``(m, k)``, each row sorted by
    (distance, index). Distances are Euclidean or ``1 - cos``.
    """
    metric = DistanceMetric.coerce(metric)
    Y = _prepare(data, metric)
    n = Y.shape[0]
    if not 1 <= k <= n - 1:
        raise GraphError(f"k must satisfy 1 <= k <= n - 1 = {n - 1}, got {k}")
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64).ravel()
    if rows.size and (rows.min() < 0 or rows.max() >= n):
        raise GraphError("query row out of range")
    if method == "auto":
        method = "brute" if n <= BRUTE_FORCE_MAX_N else "tree"
    if method == "brute":
        idx, keys = _brute(Y, rows, k, metric)
    elif method == "tree":
        idx, keys = _tree(Y, rows, k, metric)
    else:
        raise ValueError(f"unknown search method {method!r}")
    dist = np.sqrt(np.maximum(keys, 0.0)) if metric is DistanceMetric.EUCLIDEAN else keys
    return idx, dist


def knn_indices(
    data: DataMatrix,
    query_row: int,
    k: int,
    metric: Union[str, DistanceMetric] = DistanceMetric.EUCLIDEAN,
) -> list:
    """The ``k`` nearest other points to ``query_row``, nearest first."""
    idx, _ = nearest_neighbors(data, k, metric, rows=[query_row])
    return idx[0].tolist()


def build_knn_graph(
    data: DataMatrix,
    k: int,
    metric: Union[str, DistanceMetric] = DistanceMetric.EUCLIDEAN,
    method: str = "auto",
) -> TransitionMatrix:
    """kNN transition matrix: row ``i`` puts weight ``1/k`` on each of the
    ``k`` nearest other points."""
    idx, _ = nearest_neighbors(data, k, metric, method=method)
    return TransitionMatrix(np.sort(idx, axis=1), k)
