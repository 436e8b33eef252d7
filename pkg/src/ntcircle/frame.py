"""Adapted frames along approximately invariant circles.

An embedded circle K(theta) = (theta + eta_x(theta), K_y(theta)) carries
the tangent field L = K' and the normalized normal N0 = Omega L / <L, L>,
where Omega is the rotation by a quarter turn, [[0, -1], [1, 0]].  The
pair P = [L, N] with N = L*vartheta + N0 reduces the map differential to
upper-triangular form

    DF(K(theta)) P(theta) = P(f(theta)) diag(f'(theta), sigma / f'(theta)),

with f the internal dynamics (f = theta + omega in the quasi-periodic
case, f' = 1).  The torsion t0 measures how DF shears N0 back into the
tangent direction; vartheta cancels that shear and is the quantity whose
blow-up signals loss of normal hyperbolicity.  det P = 1 identically,
which is the frame's health check.

Sign conventions: <u, Omega v> = u_y v_x - u_x v_y, so <N0, Omega L> = 1
and <L, Omega N> = -1; the inverse transition P^{-1} has rows N^T Omega
and -L^T Omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fourier
from .errors import ContractionFailureError, DegenerateCircleError, FrameDegeneracyError
from .fourier import PeriodicScalar

_GRAM_FLOOR = 1e-12
_DET_TOL = 1e-8

Pair = tuple[PeriodicScalar, PeriodicScalar]


@dataclass(frozen=True)
class TorusEmbedding:
    """Circle embedding stored as (eta_x, K_y) with K_x = theta + eta_x."""

    eta_x: PeriodicScalar
    k_y: PeriodicScalar

    def __post_init__(self):
        if self.eta_x.n != self.k_y.n:
            raise ValueError("components must share one grid")

    @property
    def n(self) -> int:
        return self.eta_x.n

    @classmethod
    def zero_section(cls, n: int) -> "TorusEmbedding":
        return cls(PeriodicScalar.zeros(n), PeriodicScalar.zeros(n))

    def x_lift(self) -> np.ndarray:
        """Samples of K_x as a lift (theta_j + eta_x, not reduced mod 1)."""
        return fourier.grid(self.n) + self.eta_x.values

    def resample(self, n_new: int) -> "TorusEmbedding":
        return TorusEmbedding(
            fourier.resample(self.eta_x, n_new), fourier.resample(self.k_y, n_new)
        )


@dataclass(frozen=True)
class AdaptedFrame:
    """Tangent/normal pair reducing DF to triangular form."""

    l: Pair
    n0: Pair
    gram: PeriodicScalar
    t0: PeriodicScalar
    vartheta: PeriodicScalar
    nvec: Pair
    sigma: float


@dataclass(frozen=True)
class Diagnostics:
    """Converged-state health report attached to solver output."""

    invariance_error: float
    reducibility_error: float
    min_angle: float
    twist_a: float
    twist_mu: float
    contraction: float
    tail: float
    modes: int


def tangent(k: TorusEmbedding) -> Pair:
    """L = K' = (1 + eta_x', K_y')."""
    return (
        fourier.derivative(k.eta_x) + 1.0,
        fourier.derivative(k.k_y),
    )


def normal0(l: Pair) -> tuple[Pair, PeriodicScalar]:
    """N0 = Omega L / <L, L> and the gram function <L, L>."""
    lx, ly = l
    gram = lx * lx + ly * ly
    if float(np.min(gram.values)) < _GRAM_FLOOR:
        raise DegenerateCircleError(
            f"tangent gram min {float(np.min(gram.values)):.3e} below "
            f"{_GRAM_FLOOR:.0e}; the embedding has (nearly) stalled"
        )
    return (-ly / gram, lx / gram), gram


def torsion0(n0: Pair, dfk, omega: float) -> PeriodicScalar:
    """t0(theta) = N0(theta+omega)^T Omega DF(K(theta)) N0(theta).

    dfk holds the four entries of DF along the circle as PeriodicScalars,
    indexed dfk[i][j].
    """
    n0x, n0y = n0
    wx = dfk[0][0] * n0x + dfk[0][1] * n0y
    wy = dfk[1][0] * n0x + dfk[1][1] * n0y
    n0x_s = fourier.shift(n0x, omega)
    n0y_s = fourier.shift(n0y, omega)
    return n0y_s * wx - n0x_s * wy


def vartheta_qp(t0: PeriodicScalar, sigma: float, omega: float) -> PeriodicScalar:
    """Solve vartheta - sigma * vartheta(. + omega) = -t0 spectrally.

    Divisors 1 - sigma*e(k*omega) stay within distance 1 - sigma of 1,
    so the solve is uniformly stable for sigma in (0, 1).
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"need sigma in (0, 1), got {sigma}")
    return fourier._solve_linear_shift(-t0, 1.0, sigma, omega)


def vartheta_general(
    t0,
    f,
    fprime,
    sigma: float,
    theta: np.ndarray,
    tol: float = 1e-13,
    kmax: int | None = None,
) -> np.ndarray:
    """Torsion-cancelling coefficient for general internal dynamics f.

    Sums the transfer series

        vartheta(theta) = -sum_{k>=0} sigma^k P_k(theta)^{-2}
                           t0(f^k theta) / f'(f^k theta),
        P_k = prod_{i<k} f'(f^i theta),

    which solves f'*vartheta - (sigma/f')*vartheta(f(.)) = -t0.  The
    arguments t0, f, fprime are callables on lift arrays; theta gives the
    evaluation nodes.  Terms are added until their sup-norm drops below
    tol; failure to get there within kmax terms (default ten times the
    geometric estimate) means sigma^k is not winning against the orbit
    products and is reported as a contraction failure.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"need sigma in (0, 1), got {sigma}")
    if kmax is None:
        kmax = int(math.ceil(10.0 * math.log(tol) / math.log(sigma)))
    cur = np.array(theta, dtype=float)
    prod = np.ones_like(cur)
    acc = np.zeros_like(cur)
    sig_k = 1.0
    for _ in range(kmax):
        fp = np.asarray(fprime(cur), dtype=float)
        term = (sig_k / (prod * prod)) * np.asarray(t0(cur), dtype=float) / fp
        acc += term
        if float(np.max(np.abs(term))) < tol:
            return -acc
        prod = prod * fp
        sig_k *= sigma
        cur = np.asarray(f(cur), dtype=float)
    raise ContractionFailureError(
        f"torsion transfer series did not reach {tol:.0e} within {kmax} terms"
    )


def assemble_frame(
    l: Pair,
    n0: Pair,
    gram: PeriodicScalar,
    t0: PeriodicScalar,
    vartheta: PeriodicScalar,
    sigma: float,
) -> AdaptedFrame:
    """Build P = [L, N], N = L*vartheta + N0, and check det P = 1."""
    lx, ly = l
    n0x, n0y = n0
    nx = lx * vartheta + n0x
    ny = ly * vartheta + n0y
    det = lx * ny - ly * nx
    defect = float(np.max(np.abs(det.values - 1.0)))
    if defect > _DET_TOL:
        raise FrameDegeneracyError(
            f"frame determinant deviates from 1 by {defect:.3e}"
        )
    return AdaptedFrame(l, n0, gram, t0, vartheta, (nx, ny), sigma)


def reducibility_error(frame: AdaptedFrame, dfk, omega: float):
    """Residual DF P - P(. + omega) diag(1, sigma) and its sup-norm."""
    lx, ly = frame.l
    nx, ny = frame.nvec
    sig = frame.sigma
    cols = []
    for (vx, vy), mult in (((lx, ly), 1.0), ((nx, ny), sig)):
        rx = dfk[0][0] * vx + dfk[0][1] * vy - mult * fourier.shift(vx, omega)
        ry = dfk[1][0] * vx + dfk[1][1] * vy - mult * fourier.shift(vy, omega)
        cols.append((rx, ry))
    sup = max(c.sup() for col in cols for c in col)
    return cols, sup


def min_angle(vartheta: PeriodicScalar, gram: PeriodicScalar) -> float:
    """Smallest angle between tangent and reduced normal over the circle.

    alpha = min_theta arctan(1 / |vartheta * <L, L>|), the breakdown
    indicator: alignment of the frame columns sends it to zero.
    """
    m = float(np.max(np.abs(vartheta.values * gram.values)))
    if m == 0.0:
        return math.pi / 2.0
    return math.atan(1.0 / m)


def twist_a(frame: AdaptedFrame, d_a: Pair, omega: float) -> float:
    """b_a = < N(theta+omega)^T Omega D_a F(K(theta)) >."""
    return _twist(frame, d_a, omega)


def twist_mu(frame: AdaptedFrame, d_mu: Pair, omega: float) -> float:
    """b_mu = < N(theta+omega)^T Omega D_mu F(K(theta)) >."""
    return _twist(frame, d_mu, omega)


def _twist(frame: AdaptedFrame, field: Pair, omega: float) -> float:
    nx, ny = frame.nvec
    nx_s = fourier.shift(nx, omega)
    ny_s = fourier.shift(ny, omega)
    fx, fy = field
    return fourier.average(ny_s * fx - nx_s * fy)
