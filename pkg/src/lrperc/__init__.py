"""Long-range percolation laboratory: kernels, coupled samplers, geometric
functionals, exact small-graph oracles and Monte-Carlo estimators."""
from . import _threads  # noqa: F401  (must precede any numba import)
from .errors import (
    BracketError,
    CapacityError,
    ConfigError,
    DomainError,
    LRPercError,
    PoleError,
    StepError,
    WindowError,
)
from .kernel import Kernel, Norm, ball_count, cutoff_value, edge_probability, kernel_value
from .sampler import (
    Boundary,
    BoxSpec,
    Configuration,
    class_table,
    cluster_queries,
    displacement_classes,
    sample_configuration,
)
from ._threads import get_threads, set_threads

__version__ = "0.1.0"
