"""Absorbing-chain smoothing of cluster-membership distributions.

With ``M = I - (1 - lam) W`` the smoothed assignment is ``lam M^{-1} F0``.
When ``F0`` is uniform except for ``K`` indicator rows, only the ``K``
matching columns of ``M^{-1}`` are needed, so everything here works with
individual resolvent columns. Nothing ever forms the dense inverse.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .data import LabelVector
from .errors import SolverError
from .graph import TransitionMatrix

NEGATIVE_SLACK = 1e-12
ROW_SUM_TOL = 1e-9
SOLVERS = ("fixed-point", "bicgstab")


@dataclass(frozen=True)
class SoftAssignment:
    """``n x K`` matrix whose rows are probability vectors.

    Entries in ``[-1e-12, 0)`` are clamped to zero; anything more negative,
    or a row sum off by more than ``1e-9``, is rejected.
    """

    values: np.ndarray

    def __post_init__(self):
        F = np.array(self.values, dtype=float, copy=True)
        if F.ndim != 2 or F.shape[1] < 1:
            raise SolverError(f"soft assignment must be n x K, got shape {F.shape}")
        if not np.all(np.isfinite(F)):
            raise SolverError("soft assignment has non-finite entries")
        low = F.min()
        if low < -NEGATIVE_SLACK:
            raise SolverError(f"soft assignment entry {low:.3e} is negative beyond float noise")
        F[F < 0] = 0.0
        drift = np.abs(F.sum(axis=1) - 1.0).max()
        if drift > ROW_SUM_TOL:
            raise SolverError(f"soft assignment rows do not sum to 1 (max drift {drift:.3e})")
        F.flags.writeable = False
        object.__setattr__(self, "values", F)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ResolventColumn:
    """Column ``index`` of ``(I - (1 - lam) W)^{-1}``."""

    index: int
    values: np.ndarray
    lam: float


def _check_lambda(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise SolverError(f"lambda must lie in (0, 1), got {lam}")


def iteration_budget(lam: float, tol: float) -> int:
    """Sweeps after which the fixed-point step is certainly below ``tol``.

    The step after ``t`` sweeps is at most ``(1 - lam)^t`` in the max norm.
    """
    base = math.ceil(math.log(tol * lam) / math.log1p(-lam))
    return base + base // 10 + 10


def _fixed_point(W, lam, rhs, tol, x0=None, max_iter=None):
    coef = 1.0 - lam
    rhs = np.ascontiguousarray(rhs, dtype=float)
    out = np.empty_like(rhs)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float, order="C")
    y = np.empty_like(x)
    change = np.empty(rhs.shape[1])
    active = np.arange(rhs.shape[1])
    budget = iteration_budget(lam, tol) if max_iter is None else max_iter
    for _ in range(budget):
        kernels.resolvent_sweep(W, coef, rhs, x, y, change)
        # residual of x is exactly y - x; that of y is at most coef * change
        done = change <= tol
        if done.any():
            out[:, active[done]] = y[:, done]
            keep = ~done
            if not keep.any():
                return out
            active = active[keep]
            x = np.ascontiguousarray(y[:, keep])
            rhs = np.ascontiguousarray(rhs[:, keep])
            y = np.empty_like(x)
            change = np.empty(active.size)
        else:
            x, y = y, x
    raise SolverError(
        f"resolvent solve did not reach tol={tol:g} within {budget} sweeps "
        f"(achieved residual {change.max():.3e})"
    )


def _bicgstab(W, lam, rhs, tol):
    M = (sp.identity(W.n, format="csr") - (1.0 - lam) * W.csr).tocsr()
    x0 = np.empty_like(rhs)
    for c in range(rhs.shape[1]):
        # 2-norm residual below tol bounds the max-norm residual too
        x0[:, c], _ = spla.bicgstab(M, rhs[:, c], rtol=0.0, atol=0.1 * tol, maxiter=10 * W.n)
    # polish anything the Krylov solve left short of tol
    return _fixed_point(W, lam, rhs, tol, x0=x0)


def solve_resolvent(
    W: TransitionMatrix,
    lam: float,
    rhs: np.ndarray,
    tol: float = 1e-10,
    method: str = "fixed-point",
) -> np.ndarray:
    """Solve ``(I - (1 - lam) W) X = rhs`` to a max-norm residual of ``tol``.

    Parameters
    ----------
    rhs : ndarray, shape (n,) or (n, m)
    method : {'fixed-point', 'bicgstab'}
        ``fixed-point`` iterates ``x <- (1 - lam) W x + rhs`` for all columns
        as one block, retiring columns as they converge; the step contracts
        by ``1 - lam`` per sweep. ``bicgstab`` runs a Krylov solve per column
        and is much faster when ``lam`` is small.
    """
    _check_lambda(lam)
    if not tol > 0:
        raise SolverError(f"tol must be positive, got {tol}")
    B = np.asarray(rhs, dtype=float)
    vector = B.ndim == 1
    B = B.reshape(W.n, -1)
    if method == "fixed-point":
        X = _fixed_point(W, lam, B, tol)
    elif method == "bicgstab":
        X = _bicgstab(W, lam, np.ascontiguousarray(B), tol)
    else:
        raise SolverError(f"unknown solver {method!r}; choose from {SOLVERS}")
    return X[:, 0] if vector else X


def solve_resolvent_columns(
    W: TransitionMatrix,
    lam: float,
    indices: Iterable[int],
    tol: float = 1e-10,
    method: str = "fixed-point",
) -> list:
    """Columns ``j`` of ``(I - (1 - lam) W)^{-1}`` for each ``j`` in ``indices``,
    each with ``||M x - e_j||_inf <= tol``."""
    targets = np.asarray(list(indices), dtype=np.int64)
    if targets.size == 0:
        return []
    if targets.min() < 0 or targets.max() >= W.n:
        raise SolverError("resolvent column index out of range")
    E = np.zeros((W.n, targets.size))
    E[targets, np.arange(targets.size)] = 1.0
    X = solve_resolvent(W, lam, E, tol, method)
    return [ResolventColumn(int(j), X[:, c].copy(), lam) for c, j in enumerate(targets)]


def solve_resolvent_column(
    W: TransitionMatrix, lam: float, j: int, tol: float = 1e-10, method: str = "fixed-point"
) -> ResolventColumn:
    return solve_resolvent_columns(W, lam, [j], tol, method)[0]


class ResolventCache:
    """Resolvent columns for one ``(W, lam)``, computed on first request."""

    def __init__(self, W: TransitionMatrix, lam: float, tol: float = 1e-10, method: str = "fixed-point"):
        _check_lambda(lam)
        self.W, self.lam, self.tol, self.method = W, lam, tol, method
        self._columns: dict = {}
        self._lock = threading.Lock()

    def get(self, indices: Sequence[int]) -> list:
        with self._lock:
            missing = [j for j in dict.fromkeys(int(i) for i in indices) if j not in self._columns]
        if missing:
            solved = solve_resolvent_columns(self.W, self.lam, missing, self.tol, self.method)
            with self._lock:
                for col in solved:
                    self._columns.setdefault(col.index, col)
        with self._lock:
            return [self._columns[int(i)] for i in indices]

    def __len__(self) -> int:
        return len(self._columns)


def _check_selected(selected: Sequence[int], n: Optional[int] = None) -> list:
    sel = [int(i) for i in selected]
    if not sel:
        raise SolverError("at least one informative index is required")
    if len(set(sel)) != len(sel):
        raise SolverError(f"informative indices must be distinct, got {sel}")
    if n is not None and (min(sel) < 0 or max(sel) >= n):
        raise SolverError("informative index out of range")
    return sel


def build_initial_assignment(n: int, selected: Sequence[int]) -> SoftAssignment:
    """Uniform rows, except row ``selected[j]`` which is the indicator ``e_j``."""
    sel = _check_selected(selected, n)
    K = len(sel)
    F = np.full((n, K), 1.0 / K)
    F[sel] = np.eye(K)
    return SoftAssignment(F)


def final_solution(
    W: TransitionMatrix,
    lam: float,
    selected: Sequence[int],
    columns: Sequence[ResolventColumn],
) -> SoftAssignment:
    """Limit of the smoothing recursion started from
    ``build_initial_assignment(n, selected)``, assembled from the resolvent
    columns of the selected points::

        F = 1/K + lam * C - (lam / K) * C.sum(axis=1)

    where ``C`` stacks the columns. Row sums are 1 by construction, and a
    solver tolerance that is too loose shows up as negative entries.
    """
    _check_lambda(lam)
    sel = _check_selected(selected, W.n)
    if [c.index for c in columns] != sel:
        raise SolverError("resolvent columns do not match the selected indices")
    if any(c.lam != lam for c in columns):
        raise SolverError("resolvent columns were computed for a different lambda")
    K = len(sel)
    C = np.column_stack([c.values for c in columns])
    F = 1.0 / K + lam * (C - C.sum(axis=1, keepdims=True) / K)
    return SoftAssignment(F)


def iterate_smoothing(
    W: TransitionMatrix,
    lam: float,
    F0: SoftAssignment,
    t_max: int = 200_000,
    tol: float = 1e-13,
    return_steps: bool = False,
):
    """Run ``F <- (1 - lam) W F + lam F0`` from ``F0`` until the max-abs
    change is at most ``tol`` or ``t_max`` steps have been taken.

    A slow reference for :func:`final_solution`; not used when clustering.
    """
    _check_lambda(lam)
    A = W.csr
    F0v = F0.values
    F = F0v.copy()
    steps = 0
    while steps < t_max:
        nxt = (1.0 - lam) * (A @ F) + lam * F0v
        steps += 1
        delta = np.abs(nxt - F).max()
        F = nxt
        if delta <= tol:
            break
    out = SoftAssignment(F)
    return (out, steps) if return_steps else out


def hard_labels(F: SoftAssignment) -> LabelVector:
    """Row-wise argmax, lowest index on ties. Labels are not renumbered, so
    ``G`` is the configured ``K`` and ``.effective`` counts labels in use."""
    return LabelVector(np.argmax(F.values, axis=1), F.K)
