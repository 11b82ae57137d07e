"""Exception types raised by the cs-stap library.

Argument and shape validation raises plain :class:`ValueError`; the classes
here mark failure modes a caller may want to catch and handle separately
(fall back to another mode, report a resource limit, abort a pipeline).
"""

from __future__ import annotations


class DictionaryMemoryError(MemoryError):
    """Dictionary would exceed the allowed memory budget."""

    def __init__(self, required_bytes: int, max_bytes: int):
        self.required_bytes = required_bytes
        self.max_bytes = max_bytes
        super().__init__(
            f"dictionary requires {required_bytes} bytes "
            f"but the budget is {max_bytes} bytes"
        )


class DegenerateSupportError(RuntimeError):
    """Greedy pursuit selected columns that are numerically rank deficient."""

    def __init__(self, column_index: int, condition_number: float):
        self.column_index = column_index
        self.condition_number = condition_number
        super().__init__(
            f"selected columns became rank deficient after adding column "
            f"{column_index} (condition number {condition_number:.3e})"
        )


class NoGapError(RuntimeError):
    """Sorted magnitudes contain no usable gap (all entries equal).

    When raised from a filter, ``magnitude_map`` carries the unzeroed map so
    callers can still inspect or export it.
    """

    def __init__(self, message: str, magnitude_map=None):
        self.magnitude_map = magnitude_map
        super().__init__(message)


class SingularCovarianceError(RuntimeError):
    """Covariance estimate is numerically singular."""

    def __init__(self, condition_number: float):
        self.condition_number = condition_number
        super().__init__(
            f"covariance matrix is numerically singular "
            f"(condition number {condition_number:.3e})"
        )


class UndefinedReferenceError(ValueError):
    """Scan normalization reference has zero magnitude."""


class UndefinedMetricError(ValueError):
    """Ratio metric is undefined because a denominator is zero."""
