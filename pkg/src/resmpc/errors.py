"""Exception types shared across the package."""


class ResmpcError(Exception):
    """Base class for package-specific failures."""


class DimensionError(ResmpcError, ValueError):
    """Operands with incompatible dimensions."""


class SolverError(ResmpcError):
    """The QP/LP backend failed for a reason other than infeasibility."""


class RpiIterationError(ResmpcError):
    """Invariant-set iteration hit its iteration cap before converging.

    Carries the last iterate so callers may accept it after checking the
    invariance property themselves.
    """

    def __init__(self, message, last_iterate=None, iterations=0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class GainSynthesisError(ResmpcError):
    """No candidate feedback gain certified against every model vertex."""

    def __init__(self, message, vertex_index=None, eigenvalue=None):
        super().__init__(message)
        self.vertex_index = vertex_index
        self.eigenvalue = eigenvalue


class TubeDomainError(ResmpcError):
    """The error tube outgrew the state domain before the full horizon."""

    def __init__(self, message, first_bad_step, tube_prefix):
        super().__init__(message)
        self.first_bad_step = first_bad_step
        self.tube_prefix = tube_prefix


class InfeasibleBundleError(ResmpcError):
    """A constraint bundle is unusable (no feasible grid entry, or mismatch)."""


class AllHorizonsInfeasibleError(ResmpcError):
    """Every candidate horizon of the online controller was infeasible."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(ResmpcError):
    """A scenario configuration file is malformed or inconsistent."""
