class ConfigError(ValueError):
    """Bad configuration file, flag or parameter combination."""


class InvalidParameters(ValueError):
    """Model parameters violate a DCHSBM invariant."""


class NumericalError(RuntimeError):
    """A numerical routine failed (non-convergence, degenerate input)."""
