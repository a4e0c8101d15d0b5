"""Exception hierarchy.

Everything raised on purpose derives from WavePursuitError so callers (and the
CLI exit-code mapping) can distinguish our failures from genuine bugs.
"""

from __future__ import annotations


class WavePursuitError(Exception):
    """Base class for all package errors."""


class ValidationError(WavePursuitError):
    """A precondition on user-supplied values failed.

    ``field`` names the offending key (dotted path for scenario files).
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ParseError(WavePursuitError):
    """Scenario text could not be parsed. Carries line and column (1-based)."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, col {column}: {message}")


# -- environment ------------------------------------------------------------

class NonPositiveCellSize(ValidationError):
    pass


class ShapeOutOfBounds(ValidationError):
    pass


class DisconnectedFreeSpace(WavePursuitError):
    """Free space is empty or splits into several 4-connected components."""

    def __init__(self, message: str, components: int = 0):
        self.components = components
        super().__init__(message)


class OutOfBounds(WavePursuitError):
    pass


class NotBoundaryCell(WavePursuitError):
    pass


class DegenerateNormal(WavePursuitError):
    """Free-neighbor offsets cancel; no usable normal direction."""


# -- solver -----------------------------------------------------------------

class SolverFailure(WavePursuitError):
    """A field solve failed. The engine re-raises these with the tick index."""

    def __init__(self, message: str, tick: int | None = None):
        self.tick = tick
        if tick is not None:
            message = f"tick {tick}: {message}"
        super().__init__(message)


class NoConvergence(SolverFailure):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} sweeps (residual {residual:.3e})"
        )


class UnstableTimeStep(WavePursuitError):
    def __init__(self, dt: float, bound: float):
        self.dt = dt
        self.bound = bound
        super().__init__(f"dt={dt:g} exceeds stability bound {bound:g}")


class MissingPreviousStep(WavePursuitError):
    """Time derivative requested before the field has taken any step."""


class TargetInsideObstacle(WavePursuitError):
    pass


# -- guidance ---------------------------------------------------------------

class QueryInObstacle(WavePursuitError):
    pass


class OutOfDomain(WavePursuitError):
    pass


class SingularGradient(WavePursuitError):
    """Exact zero gradient in the unregularized law."""


class FieldKindMismatch(WavePursuitError):
    pass


# -- engine / io ------------------------------------------------------------

class ScenarioInvalid(ValidationError):
    pass


class SchemaMismatch(WavePursuitError):
    """Trace or report file does not match the expected schema/version."""


class TraceTooShort(WavePursuitError):
    pass


class MissingSnapshots(WavePursuitError):
    """An analysis needed retained field snapshots the trace does not carry."""
