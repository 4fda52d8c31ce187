"""Tensorized reference-vector-guided evolutionary optimization on dense numpy kernels."""

__version__ = "0.1.0"

from .algorithms import Archive, RunConfig, RunRecord, nsga2_run, random_search_run, tensor_rvea_run
from .problems import make_problem
from .refvec import RefVectorSet
from .rng import RngStream
from .selection import rv_select

__all__ = [
    "Archive",
    "RefVectorSet",
    "RngStream",
    "RunConfig",
    "RunRecord",
    "make_problem",
    "nsga2_run",
    "random_search_run",
    "rv_select",
    "tensor_rvea_run",
    "__version__",
]
