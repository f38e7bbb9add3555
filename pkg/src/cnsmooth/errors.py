"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CNSError(Exception):
    exit_code = 1


class DataError(CNSError):
    """Malformed, empty or degenerate input data."""

    exit_code = 3


class GraphError(CNSError):
    """Neighbour graph cannot be built (bad k, zero-norm row under cosine)."""

    exit_code = 4


class SolverError(CNSError):
    """Resolvent solve failed to reach tolerance, or a checked
    postcondition on the smoothed assignment does not hold."""

    exit_code = 5


class SelectionError(CNSError):
    """Invalid tuning configuration or grid."""

    exit_code = 6


class EvaluationError(CNSError):
    exit_code = 7


EXIT_CODES = {
    "usage error": 2,
    "data error": DataError.exit_code,
    "graph error": GraphError.exit_code,
    "solver error": SolverError.exit_code,
    "selection error": SelectionError.exit_code,
    "evaluation error": EvaluationError.exit_code,
}
