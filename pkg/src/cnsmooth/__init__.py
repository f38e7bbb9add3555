"""Clustering by non-parametric smoothing.

Cluster-membership distributions are estimated by repeatedly averaging over
k-nearest-neighbour sets, with a small pull back towards a nearly uniform
initial assignment. The limit is available in closed form as absorption
probabilities of a Markov chain. Tuning parameters and the number of
clusters are chosen automatically.
"""

__version__ = "0.1.0"

from .chain import (
    ResolventColumn,
    SoftAssignment,
    build_initial_assignment,
    final_solution,
    hard_labels,
    iterate_smoothing,
    solve_resolvent,
    solve_resolvent_column,
    solve_resolvent_columns,
)
from .data import DataMatrix, LabelVector, load_csv, pca_reduce, standardize, write_csv
from .errors import CNSError, DataError, EvaluationError, GraphError, SelectionError, SolverError
from .evaluation import accuracy, ami, ari, contingency, evaluate
from .graph import DistanceMetric, TransitionMatrix, build_knn_graph, knn_indices
from .select import (
    candidate_set,
    criterion,
    grid_search,
    idealized_improvement,
    idealized_limits,
    select_informative,
    selection_scores,
)

__all__ = [
    "CNSError", "DataError", "EvaluationError", "GraphError", "SelectionError", "SolverError",
    "DataMatrix", "LabelVector", "load_csv", "write_csv", "standardize", "pca_reduce",
    "DistanceMetric", "TransitionMatrix", "build_knn_graph", "knn_indices",
    "ResolventColumn", "SoftAssignment", "solve_resolvent", "solve_resolvent_column",
    "solve_resolvent_columns", "build_initial_assignment", "final_solution",
    "iterate_smoothing", "hard_labels",
    "candidate_set", "selection_scores", "select_informative", "criterion",
    "idealized_limits", "idealized_improvement", "grid_search",
    "contingency", "accuracy", "ari", "ami", "evaluate",
    "cluster",
]


def cluster(X, metric="euclidean", pca=True, max_pcs=100, center=True, **kwargs):
    """Standardise, optionally project, and run the automatic grid search.

    ``X`` is an ``(n, d)`` array. Returns the ``ClusterResult`` of the best
    configuration.
    """
    data = standardize(DataMatrix(X), center=center)
    if pca:
        data = pca_reduce(data, max_pcs)
    return grid_search(data, metric, **kwargs).result
