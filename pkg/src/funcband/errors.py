"""Exception types shared across the library.

The CLI maps these onto exit codes: usage errors exit 2, ``DataError``
subclasses exit 3, and numerical non-convergence exits 4.
"""


class FuncbandError(Exception):
    """Base class for all library errors."""


class DataError(FuncbandError):
    """Invalid or inconsistent input data."""


class GridMismatch(DataError):
    """Operands are discretized on different time grids."""


class SupportMismatch(DataError):
    """Operands are observed on incompatible supports."""


class EmptySupport(DataError):
    """An observation pattern retains no grid point."""


class MetricPatternMismatch(DataError):
    """The requested distance cannot be evaluated on this observation pattern."""


class DegenerateDistances(DataError):
    """All pairwise distances are zero; no bandwidth can be derived."""


class EmptyWarpSet(FuncbandError):
    """No trial warp vector was accepted at the requested level."""
