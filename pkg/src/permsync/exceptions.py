"""Exception types raised across the package."""

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible sizes."""


class DomainError(ValueError):
    """Input lies outside the domain an operation accepts."""


class GraphGenerationError(RuntimeError):
    """A random graph with the requested property could not be drawn."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """A factorization hit a (numerically) singular matrix."""


class ConfigError(ValueError):
    """Invalid algorithm or experiment configuration."""


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based, or None if not tied to a line."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
