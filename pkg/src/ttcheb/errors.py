"""Exception types shared across the package."""


class FormatError(ValueError):
    """A checkpoint stream is malformed."""


class ConfigError(ValueError):
    """A run configuration is invalid. ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class DivergenceError(ArithmeticError):
    """A propagation drifted in norm, usually because the spectral bounds
    do not bracket the Hamiltonian."""
