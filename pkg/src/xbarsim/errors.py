"""Exception types shared across the simulator."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid parameter value or configuration document.

    ``path`` is the dotted location of the offending field (``tile.device.dw_min``)
    and ``line`` the 1-based source line when the error came from a parsed file.
    """

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self._render())

    def _render(self) -> str:
        where = self.path or "<root>"
        if self.line is not None:
            return f"{where} (line {self.line}): {self.message}"
        return f"{where}: {self.message}"

    def prefixed(self, prefix: str) -> "ConfigError":
        path = f"{prefix}.{self.path}" if self.path else prefix
        return ConfigError(self.message, path, self.line)


class ShapeError(ValueError):
    """Array shape does not match the tile geometry."""


class NonFiniteInputError(ValueError):
    """Input vector contains NaN or infinite entries."""
