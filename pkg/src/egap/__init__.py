"""Model-based excessive-gap primal-dual methods for linearly constrained convex programs."""

from .errors import SolverError

__version__ = "0.1.0"

__all__ = ["SolverError", "__version__"]
