"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: input/contract problems exit 2,
training divergence exits 3, checkpoint/dataset mismatches exit 4.
"""


class AdvAlstmError(Exception):
    """Base class for all package errors."""


class ParseError(AdvAlstmError):
    """A file could not be parsed (message carries file and line context)."""


class DataError(AdvAlstmError):
    """Input rows violate the data contract (bad prices, duplicates, ...)."""


class AlignmentError(DataError):
    """Trading-day alignment produced an empty calendar."""


class WindowError(AdvAlstmError):
    """Not enough history at the requested day index."""


class ShapeError(AdvAlstmError):
    """Tensor shapes do not match the declared parameter layout."""


class NumericError(AdvAlstmError):
    """A computation produced NaN or Inf."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""


class ContractError(AdvAlstmError):
    """A documented precondition was violated by the caller."""


class ConfigError(AdvAlstmError):
    """A run config is missing keys or violates an invariant."""


class ArtifactMismatchError(AdvAlstmError):
    """Checkpoint and dataset disagree on dimensions or lag."""


class EmptySplitWarning(UserWarning):
    """A train/val/test split ended up with no retained examples."""


class MarketSemanticsWarning(UserWarning):
    """Rows where low/high do not bound open/close (kept, but suspicious)."""
