"""Spectral continuation of quasi-periodic invariant circles.

The package computes rotational invariant circles of dissipative
(conformally symplectic) annulus maps, continues them in a map
parameter while keeping the rotation number fixed, tracks non-twist
(shearless) circles through an averaged twist constraint, and
diagnoses their breakdown through the collapse of the angle between
the tangent and stable bundles.

Layout:

- ``fourier``: periodic grid functions, FFT analysis, shift/derivative
  algebra and the two cohomological solvers.
- ``maps``: the dissipative standard non-twist family and its
  parameter derivatives.
- ``frame``: the adapted (tangent, stable) frame along a circle and
  its torsion/twist diagnostics.
- ``solver_qp``: the quasi-periodic Newton solver with the rotation
  locked to a fixed irrational, plus continuation, breakdown fitting
  and the twist-surface driver.
- ``solver_general``: the grid-based solver with the internal circle
  map free, rotation numbers by weighted Birkhoff averaging, and
  parameter sweeps.
- ``cli``: command-line driver writing CSV tables.
"""

from .errors import (
    ContractionFailureError,
    DegenerateCircleError,
    DivergenceError,
    FrameDegeneracyError,
    InversionError,
    MalformedCoefficientsError,
    MuDegeneracyError,
    NtCircleError,
    SmallDivisorError,
    ToleranceNotMetError,
    TwistDegeneracyError,
)
from .fourier import (
    FourierCoeffs,
    PeriodicScalar,
    analyze,
    average,
    dealias,
    derivative,
    grid,
    resample,
    shift,
    solve_contractive,
    solve_small_divisor,
    synthesize,
    tail_fraction,
)
from .maps import Forcing, MapFamily, ParamPoint, StandardNonTwistMap, check_symmetry
from .frame import (
    AdaptedFrame,
    Diagnostics,
    TorusEmbedding,
    assemble_frame,
    min_angle,
    normal0,
    reducibility_error,
    tangent,
    torsion0,
    twist_a,
    twist_mu,
    vartheta_general,
    vartheta_qp,
)
from .solver_qp import (
    GOLDEN_MEAN,
    BreakdownFit,
    ContinuationPolicy,
    ContinuationRecord,
    ContinuationResult,
    EpsDerivative,
    QpProblem,
    QpState,
    SurfacePath,
    breakdown_extrapolate,
    continue_in_eps,
    eps_derivative,
    frame_fields,
    newton_solve,
    residuals,
    twist_surface,
)
from .solver_general import (
    GeneralSolution,
    GridCircle,
    InternalMap,
    SweepRecord,
    ambient_rotation_number,
    induced_internal_map,
    interp,
    invert_map,
    lock_fraction,
    newton_solve_general,
    newton_step_general,
    rotation_number,
    sweep_parameter,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptedFrame",
    "BreakdownFit",
    "ContinuationPolicy",
    "ContinuationRecord",
    "ContinuationResult",
    "ContractionFailureError",
    "DegenerateCircleError",
    "Diagnostics",
    "DivergenceError",
    "EpsDerivative",
    "Forcing",
    "FourierCoeffs",
    "FrameDegeneracyError",
    "GOLDEN_MEAN",
    "GeneralSolution",
    "GridCircle",
    "InternalMap",
    "InversionError",
    "MalformedCoefficientsError",
    "MapFamily",
    "MuDegeneracyError",
    "NtCircleError",
    "ParamPoint",
    "PeriodicScalar",
    "QpProblem",
    "QpState",
    "SmallDivisorError",
    "StandardNonTwistMap",
    "SurfacePath",
    "SweepRecord",
    "ToleranceNotMetError",
    "TorusEmbedding",
    "TwistDegeneracyError",
    "ambient_rotation_number",
    "analyze",
    "assemble_frame",
    "average",
    "breakdown_extrapolate",
    "check_symmetry",
    "continue_in_eps",
    "dealias",
    "derivative",
    "eps_derivative",
    "frame_fields",
    "grid",
    "induced_internal_map",
    "interp",
    "invert_map",
    "lock_fraction",
    "min_angle",
    "newton_solve",
    "newton_solve_general",
    "newton_step_general",
    "normal0",
    "reducibility_error",
    "resample",
    "residuals",
    "rotation_number",
    "shift",
    "solve_contractive",
    "solve_small_divisor",
    "sweep_parameter",
    "synthesize",
    "tail_fraction",
    "tangent",
    "torsion0",
    "twist_a",
    "twist_mu",
    "twist_surface",
    "vartheta_general",
    "vartheta_qp",
]
