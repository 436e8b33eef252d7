"""Typed failure modes of the circle solvers.

Plain precondition violations (bad grid sizes, parameters out of range)
raise ValueError; the classes here mark numerical or dynamical failures
that callers may want to catch and react to, e.g. by halving a
continuation step or stopping a sweep.
"""


class NtCircleError(Exception):
    """Base class for all solver failures."""


class MalformedCoefficientsError(NtCircleError):
    """Coefficient data does not describe a real-valued function."""


class SmallDivisorError(NtCircleError):
    """A cohomological divisor on the represented modes is below the floor."""

    def __init__(self, k: int, divisor: float):
        self.k = k
        self.divisor = divisor
        super().__init__(
            f"divisor |1 - e(k*omega)| = {divisor:.3e} at mode k = {k} "
            f"is below the 1e-13 floor; omega is too close to resonant "
            f"on this grid"
        )


class DegenerateCircleError(NtCircleError):
    """The tangent vector of the embedding (nearly) vanishes somewhere."""


class FrameDegeneracyError(NtCircleError):
    """The assembled frame failed its unit-determinant check."""


class ContractionFailureError(NtCircleError):
    """A geometric series or fixed-point iteration did not contract."""


class MuDegeneracyError(NtCircleError):
    """The drift direction has (numerically) zero projected average."""


class TwistDegeneracyError(NtCircleError):
    """The scalar twist closure has a vanishing sensitivity to a."""


class DivergenceError(NtCircleError):
    """Newton ran out of iterations or the residual blew up.

    `residual` is the best sup-norm invariance error the iteration
    reached and `tail` the spectral tail fraction at that point; a small
    residual with a thin tail marks a solver floor on a well-resolved
    circle rather than a genuinely lost step.
    """

    def __init__(self, message: str, residual: float = float("nan"),
                 tail: float = float("nan")):
        self.residual = residual
        self.tail = tail
        super().__init__(message)


class InversionError(NtCircleError):
    """A circle map could not be inverted (non-monotone data)."""


class ToleranceNotMetError(NtCircleError):
    """An averaging process hit its cap before reaching the tolerance.

    Carries the best estimate and its error gauge so callers can degrade
    gracefully instead of discarding the run.
    """

    def __init__(self, best: float, err: float, message: str):
        self.best = best
        self.err = err
        super().__init__(message)
