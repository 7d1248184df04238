"""Exception types shared across the package."""


class SimNetError(Exception):
    """Base class for all package errors."""


class DimensionError(SimNetError):
    """Shapes of two operands are incompatible."""

    def __init__(self, message, left=None, right=None):
        if left is not None or right is not None:
            message = f"{message}: {left} vs {right}"
        super().__init__(message)


class NumericError(SimNetError):
    """Non-finite values (NaN/Inf) encountered where finite data is required."""


class ContractError(SimNetError):
    """An operation was called in a way that violates its contract."""


class FormatError(SimNetError):
    """A file does not match its declared on-disk format."""


class EmptyForegroundError(SimNetError):
    """No eligible (non-black) pixels; a point cloud cannot be built."""


class LabelError(SimNetError):
    """A label lies outside the configured class range."""


class DataError(SimNetError):
    """Dataset-level problem: missing files, empty splits, unpaired samples."""


class DivergenceError(SimNetError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
