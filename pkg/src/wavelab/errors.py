"""Exception hierarchy shared by all wavelab modules."""


class WaveLabError(Exception):
    """Base class for every error raised by wavelab."""


class DomainError(WaveLabError, ValueError):
    """An argument lies outside the supported mathematical domain."""


class StructuralError(WaveLabError, ValueError):
    """Array shapes or grids do not match."""


class GeometryError(WaveLabError, ValueError):
    """A transformed field no longer fits inside the truncation ball."""


class ConstructionError(WaveLabError, ValueError):
    """A ladder rung cannot be built; the message names the violated inequality."""


class NeedsMoreRungsError(WaveLabError, ValueError):
    pass


class MissingChannelError(WaveLabError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing channel"


class ResolutionError(WaveLabError, ValueError):
    """A single ledger step already exceeds the requested partition threshold."""


class NoRungCountError(WaveLabError, ArithmeticError):
    """The rung integral plateaus below its target: 1/(y g(y)^2) is integrable."""


class NoContractionError(WaveLabError, ArithmeticError):
    """Picard iterates stopped contracting."""
