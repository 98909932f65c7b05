"""Exception types raised across the package."""


class DomainError(ValueError):
    """A point lies outside the spatial extent of a grid."""


class ConfigError(ValueError):
    """Invalid parameters or configuration."""


class NonConvergenceError(RuntimeError):
    """The iterative eikonal solver did not reach its tolerance.

    The residual history is kept on ``history`` so callers can inspect it.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class BacktrackingError(RuntimeError):
    """Gradient descent on a distance map stalled or ran out of steps."""


class ThinningError(RuntimeError):
    """An initial contour could not be traced as a closed curve."""


class UnclaimedPointError(LookupError):
    """A point is not covered by any grouped cost region."""


class StageError(RuntimeError):
    """A pipeline stage failed; names the stage and, when known, the component."""

    def __init__(self, stage: str, message: str, component: int | None = None):
        where = f"stage {stage!r}" + (f", component {component}" if component is not None else "")
        super().__init__(f"{where}: {message}")
        self.stage = stage
        self.component = component
