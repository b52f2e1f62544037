"""Exception hierarchy shared across the package."""


class WhffError(Exception):
    """Base class for all package errors (maps to CLI exit code 1)."""


class DimensionError(WhffError):
    """Operand shapes do not agree."""


class NonFiniteError(WhffError):
    """An input contains NaN or infinity."""

    def __init__(self, name, index):
        self.name = name
        self.index = index
        super().__init__(f"non-finite value in {name} at flat index {index}")


class WindowLookupError(WhffError):
    """Unknown field or slit identifier."""


class ModelTooLargeError(WhffError):
    """Dense deformation operator exceeds the configured memory cap."""


class ScheduleError(WhffError):
    """Invalid scan schedule parameters."""


class CorruptStreamError(WhffError):
    """Malformed container or compressed stream (maps to CLI exit code 2)."""
