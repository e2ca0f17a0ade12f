"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class ResolutionError(ValueError):
    """Scan grid too coarse to bracket every root."""


class ConfigError(ValueError):
    """Configuration failed validation; ``violations`` lists every problem."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
