"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError and its
subclasses -> 2, CapabilityError -> 3, RankError / InstabilityError -> 4.
"""


class ConfigError(ValueError):
    """Bad run configuration or malformed input data."""


class SnapshotParseError(ConfigError):
    """A snapshot CSV row failed to parse; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SnapshotSchemaError(ConfigError):
    """Snapshot CSV header or column layout violates the documented schema."""


class BinningError(ConfigError):
    """Binning produced no usable batches (every bin below min_occupancy)."""


class CapabilityError(RuntimeError):
    """The requested quantity needs data the inputs cannot provide.

    Typical case: res / pseudospectra / subspace errors need the
    cross-batch matrix H, which requires batched data with at least two
    realizations per state.
    """


class RankError(ArithmeticError):
    """Gram matrix numerically zero below the regularization cutoff."""


class InstabilityError(ArithmeticError):
    """Trajectory integration diverged; retry with a smaller step size."""
