"""Exception hierarchy; each failure carries a machine-readable `code` for report.json."""


class CsvortexError(Exception):
    """Base class for solver and configuration failures."""
    code = 'error'

    def to_dict(self) -> dict:
        return {'code': self.code, 'message': str(self)}


class StepFailure(CsvortexError):
    """Adaptive integrator could not advance (finite-time blow-up region)."""
    code = 'step_failure'


class BracketFailure(CsvortexError):
    """Both ends of the shooting bracket classify identically."""
    code = 'bracket_failure'


class TailNotConverged(CsvortexError):
    """Forcing term did not decay below tolerance before the integration horizon."""
    code = 'tail_not_converged'


class OutOfRange(CsvortexError):
    """Requested decay exponent outside (2N + 4, ∞)."""
    code = 'out_of_range'


class NoBracket(CsvortexError):
    """β(a) − β_target never changed sign over the scan."""
    code = 'no_bracket'


class VortexOnSharedNode(CsvortexError):
    """Two vortices snap to the same grid node."""
    code = 'vortex_on_shared_node'


class MonotonicityViolation(CsvortexError):
    """An iterate rose above its predecessor beyond the allowed slack."""
    code = 'monotonicity_violation'

    def __init__(self, message: str, iteration: int, excess: float):
        super().__init__(message)
        self.iteration = iteration
        self.excess = excess


class UpperSeedFailure(CsvortexError):
    """Doubling λ never left the regime where the iteration diverges."""
    code = 'upper_seed_failure'


class EpsTooLarge(CsvortexError):
    """Cutoff radius too large for the sub-solution construction."""
    code = 'eps_too_large'


class InequalityViolation(CsvortexError):
    """A sub-solution inequality failed beyond discretization slack."""
    code = 'inequality_violation'

    def __init__(self, message: str, location: tuple[float, float], slack: float):
        super().__init__(message)
        self.location = location
        self.slack = slack


class WindowTooShort(CsvortexError):
    """Not enough post-decay samples for a tail fit."""
    code = 'window_too_short'


class SchemaError(CsvortexError):
    """Run configuration has a missing, unknown or mistyped field."""
    code = 'schema_error'

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ConstraintError(CsvortexError):
    """Run configuration is well-formed but violates a mathematical constraint."""
    code = 'constraint_error'
