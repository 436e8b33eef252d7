"""Grid-based Newton for invariant circles with unknown internal dynamics.

Solves F(K(theta)) = K(f(theta)) for both the embedding K and the circle
map f, with no rotation number prescribed and no small divisors: the
tangent correction is taken up by f (Delta f = -eta_L) and the normal
correction by a contractive transfer equation solved with a fixed-point
iteration.  This variant follows the circle into phase locking, which is
what the rotation-number sweeps exploit.

Everything lives on a uniform grid with local Lagrange interpolation of
even order p; derivatives use the matching central stencils.  Internal
maps are stored as displacement fields g with f(theta) = theta + g(theta)
on lifts, so rational and irrational dynamics are handled alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    ContractionFailureError,
    DegenerateCircleError,
    DivergenceError,
    FrameDegeneracyError,
    InversionError,
    NtCircleError,
    ToleranceNotMetError,
)
from .frame import vartheta_general
from .maps import MapFamily, ParamPoint

_GRAM_FLOOR = 1e-12
_DET_TOL = 1e-8
_FIXED_POINT_TOL = 1e-12


def _check_order(order: int) -> None:
    if order % 2 != 0 or not 2 <= order <= 8:
        raise ValueError(f"interpolation order must be even in [2, 8], got {order}")


def _check_grid(n: int, order: int) -> None:
    _check_order(order)
    if n < 4 * order:
        raise ValueError(f"need at least 4*order = {4 * order} nodes, got {n}")


@dataclass(frozen=True)
class GridCircle:
    """Embedding samples (eta_x, k_y) on theta_j = j/n, K_x = theta + eta_x."""

    eta_x: np.ndarray
    k_y: np.ndarray
    order: int = 4

    def __post_init__(self):
        ex = np.asarray(self.eta_x, dtype=float)
        ky = np.asarray(self.k_y, dtype=float)
        if ex.shape != ky.shape or ex.ndim != 1:
            raise ValueError("components must be equal-length vectors")
        _check_grid(ex.size, self.order)
        object.__setattr__(self, "eta_x", ex)
        object.__setattr__(self, "k_y", ky)

    @property
    def n(self) -> int:
        return self.eta_x.size

    def resample(self, n_new: int) -> "GridCircle":
        """Interpolate both components onto an n_new-node grid."""
        if n_new == self.n:
            return self
        theta = np.arange(n_new) / n_new
        return GridCircle(
            interp(self.eta_x, theta, self.order),
            interp(self.k_y, theta, self.order),
            self.order,
        )


@dataclass(frozen=True)
class InternalMap:
    """Orientation-preserving circle map f(theta) = theta + g(theta)."""

    g: np.ndarray
    order: int = 4

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 1:
            raise ValueError("displacement must be a vector")
        _check_grid(g.size, self.order)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.g.size

    @classmethod
    def rotation(cls, n: int, omega: float, order: int = 4) -> "InternalMap":
        return cls(np.full(n, omega), order)

    def resample(self, n_new: int) -> "InternalMap":
        if n_new == self.n:
            return self
        theta = np.arange(n_new) / n_new
        return InternalMap(interp(self.g, theta, self.order), self.order)

    def __call__(self, theta):
        return np.asarray(theta) + interp(self.g, theta, self.order)

    def fprime_grid(self) -> np.ndarray:
        return 1.0 + grid_derivative(self.g, self.order)


# order -> (offsets, coefficients) of the central first-derivative stencil
_DERIV_STENCILS = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1.0 / 12, -2.0 / 3, 2.0 / 3, -1.0 / 12)),
    6: ((-3, -2, -1, 1, 2, 3),
        (-1.0 / 60, 3.0 / 20, -3.0 / 4, 3.0 / 4, -3.0 / 20, 1.0 / 60)),
    8: ((-4, -3, -2, -1, 1, 2, 3, 4),
        (1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5,
         4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280)),
}


def grid_derivative(values: np.ndarray, order: int) -> np.ndarray:
    """Periodic central-difference d/dtheta of matching order."""
    _check_order(order)
    offs, coefs = _DERIV_STENCILS[order]
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for o, c in zip(offs, coefs):
        out += c * np.roll(values, -o)
    return out * values.size


def interp_stencil(n: int, theta, order: int):
    """Gather indices and Lagrange weights for evaluation at theta.

    Uses the order-p stencil centered on the containing interval; exact
    for local polynomials of degree < p and reproduces node values.
    Returns (idx, w) of shape (p, m) for reuse on many grid functions.
    """
    _check_grid(n, order)
    t = np.asarray(theta, dtype=float) * n
    base = np.floor(t).astype(np.int64)
    s = t - base
    offs = np.arange(order) - (order // 2 - 1)
    idx = np.mod(base[None, :] + offs[:, None], n)
    w = np.empty((order, s.size))
    for i, oi in enumerate(offs):
        num = np.ones_like(s)
        den = 1.0
        for j, oj in enumerate(offs):
            if j == i:
                continue
            num *= s - oj
            den *= oi - oj
        w[i] = num / den
    return idx, w


def interp_apply(values: np.ndarray, idx, w) -> np.ndarray:
    return np.sum(values[idx] * w, axis=0)


def interp(values: np.ndarray, theta, order: int) -> np.ndarray:
    """Local Lagrange interpolation of grid samples at points theta."""
    values = np.asarray(values, dtype=float)
    scalar = np.isscalar(theta) or np.ndim(theta) == 0
    idx, w = interp_stencil(values.size, np.atleast_1d(theta), order)
    out = interp_apply(values, idx, w)
    return float(out[0]) if scalar else out


def invert_map(f: InternalMap, tol: float = 1e-13, max_iter: int = 60) -> InternalMap:
    """Inverse circle map on the same grid, by per-node Newton on lifts."""
    n = f.n
    fp = f.fprime_grid()
    if float(np.min(fp)) <= 0.0:
        raise InversionError(
            f"f' reaches {float(np.min(fp)):.3e}; the map is not invertible"
        )
    theta = np.arange(n) / n
    dg = grid_derivative(f.g, f.order)
    r = theta - float(np.mean(f.g))
    for _ in range(max_iter):
        res = r + interp(f.g, r, f.order) - theta
        res -= np.round(res)
        if float(np.max(np.abs(res))) < tol:
            break
        slope = 1.0 + interp(dg, r, f.order)
        r = r - res / np.maximum(slope, 0.05)
    else:
        raise InversionError("inverse-map Newton did not converge")
    return InternalMap(r - theta, f.order)


def invariance_error(
    circle: GridCircle, f: InternalMap, family: MapFamily, par: ParamPoint
) -> float:
    """sup |F(K(theta)) - K(f(theta))| on the grid."""
    n = circle.n
    theta = np.arange(n) / n
    fx, fy = family.eval_lift(theta + circle.eta_x, circle.k_y, par)
    s = theta + f.g
    idx, w = interp_stencil(n, s, circle.order)
    ex = fx - (s + interp_apply(circle.eta_x, idx, w))
    ey = fy - interp_apply(circle.k_y, idx, w)
    return float(max(np.max(np.abs(ex)), np.max(np.abs(ey))))


@dataclass(frozen=True)
class GeneralStepReport:
    err: float            # invariance sup-norm before the update
    min_angle: float
    fixed_point_iters: int


def _smooth(values: np.ndarray) -> np.ndarray:
    """Zero the top third of the spectrum of a grid function."""
    coeff = np.fft.rfft(values)
    coeff[values.size // 3 + 1:] = 0.0
    return np.fft.irfft(coeff, values.size)


def newton_step_general(
    circle: GridCircle, f: InternalMap, family: MapFamily, par: ParamPoint
):
    """One Newton update of (K, f); returns the new pair and a report."""
    n = circle.n
    p = circle.order
    sigma = family.sigma
    theta = np.arange(n) / n

    g = f.g
    fp = f.fprime_grid()
    if float(np.min(fp)) <= 0.0:
        raise InversionError("internal map lost monotonicity")
    s = theta + g
    s_idx, s_w = interp_stencil(n, s, p)

    fx, fy = family.eval_lift(theta + circle.eta_x, circle.k_y, par)
    ex = fx - (s + interp_apply(circle.eta_x, s_idx, s_w))
    ey = fy - interp_apply(circle.k_y, s_idx, s_w)
    err = float(max(np.max(np.abs(ex)), np.max(np.abs(ey))))

    lx = 1.0 + grid_derivative(circle.eta_x, p)
    ly = grid_derivative(circle.k_y, p)
    gram = lx * lx + ly * ly
    if float(np.min(gram)) < _GRAM_FLOOR:
        raise DegenerateCircleError("tangent gram collapsed on the grid")
    n0x = -ly / gram
    n0y = lx / gram

    jac = family.jacobian(theta + circle.eta_x, circle.k_y, par)
    wx = jac[0, 0] * n0x + jac[0, 1] * n0y
    wy = jac[1, 0] * n0x + jac[1, 1] * n0y
    t0 = interp_apply(n0y, s_idx, s_w) * wx - interp_apply(n0x, s_idx, s_w) * wy

    dg = grid_derivative(g, p)
    vth = vartheta_general(
        lambda q: interp(t0, q, p),
        lambda q: q + interp(g, q, p),
        lambda q: 1.0 + interp(dg, q, p),
        sigma,
        theta,
    )
    nx = lx * vth + n0x
    ny = ly * vth + n0y
    det = lx * ny - ly * nx
    if float(np.max(np.abs(det - 1.0))) > _DET_TOL:
        raise FrameDegeneracyError("grid frame determinant drifted from 1")
    alpha = math.pi / 2.0
    m = float(np.max(np.abs(vth * gram)))
    if m > 0.0:
        alpha = math.atan(1.0 / m)

    eta_l = -(interp_apply(ny, s_idx, s_w) * ex - interp_apply(nx, s_idx, s_w) * ey)
    eta_n = (interp_apply(ly, s_idx, s_w) * ex - interp_apply(lx, s_idx, s_w) * ey)

    # normal equation (sigma/f') xi - xi o f = eta_n, backward fixed point
    finv = invert_map(f)
    r = theta + finv.g
    r_idx, r_w = interp_stencil(n, r, p)
    a_term = -interp_apply(eta_n, r_idx, r_w)
    b_term = sigma / (1.0 + interp_apply(dg, r_idx, r_w))
    cap = int(math.ceil(10.0 * math.log(_FIXED_POINT_TOL) / math.log(sigma)))
    xi = a_term.copy()
    fp_iters = cap
    for it in range(cap):
        nxt = a_term + b_term * interp_apply(xi, r_idx, r_w)
        delta = float(np.max(np.abs(nxt - xi)))
        xi = nxt
        if delta < _FIXED_POINT_TOL * max(1.0, float(np.max(np.abs(xi)))):
            fp_iters = it + 1
            break
    else:
        raise ContractionFailureError(
            f"normal fixed point stalled after {cap} iterations"
        )

    # smooth the updates: grid-frequency components of the correction are
    # amplified by the derivative stencils faster than Newton contracts
    # them, so unfiltered steps go unstable; top-octave content of the
    # solution itself is recovered by grid refinement instead
    new_circle = GridCircle(
        circle.eta_x + _smooth(nx * xi),
        circle.k_y + _smooth(ny * xi),
        p,
    )
    new_f = InternalMap(g - _smooth(eta_l), p)
    return new_circle, new_f, GeneralStepReport(err, alpha, fp_iters)


@dataclass(frozen=True)
class GeneralSolution:
    circle: GridCircle
    f: InternalMap
    err: float
    iterations: int


def newton_solve_general(
    circle: GridCircle,
    f: InternalMap,
    family: MapFamily,
    par: ParamPoint,
    tol: float = 1e-11,
    max_newton: int = 20,
) -> GeneralSolution:
    """Iterate newton_step_general to tolerance."""
    first = None
    for it in range(max_newton + 1):
        err = invariance_error(circle, f, family, par)
        if first is None:
            first = err
        if err <= tol:
            return GeneralSolution(circle, f, err, it)
        if it == max_newton or not math.isfinite(err) or err > 1e3 * (first + tol):
            raise DivergenceError(
                f"general Newton stuck at residual {err:.3e} "
                f"after {it} iterations",
                residual=err,
            )
        circle, f, _ = newton_step_general(circle, f, family, par)
    raise DivergenceError("unreachable", residual=float("nan"))


def _orbit_displacements(f: InternalMap, theta0: float, count: int, out: list):
    """Extend the displacement sequence of the orbit of theta0 to count."""
    n = f.n
    p = f.order
    x = (theta0 + sum(out)) % 1.0 if out else theta0 % 1.0
    if p == 4:
        gl = f.g.tolist()
        for _ in range(count - len(out)):
            t = x * n
            i = int(t)
            s = t - i
            d = (
                -s * (s - 1.0) * (s - 2.0) / 6.0 * gl[(i - 1) % n]
                + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * gl[i % n]
                - (s + 1.0) * s * (s - 2.0) / 2.0 * gl[(i + 1) % n]
                + (s + 1.0) * s * (s - 1.0) / 6.0 * gl[(i + 2) % n]
            )
            out.append(d)
            x = (x + d) % 1.0
    else:
        while len(out) < count:
            d = float(interp(f.g, x, p))
            out.append(d)
            x = (x + d) % 1.0


def _weighted_average(d: np.ndarray) -> float:
    m = d.size
    t = (np.arange(m) + 0.5) / m
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return float(np.sum(w * d) / np.sum(w))


def rotation_number(
    f: InternalMap,
    tol: float = 1e-12,
    theta0: float = 0.0,
    m_max: int = 1 << 22,
) -> float:
    """Rotation number by weighted Birkhoff averaging of the displacement.

    The exponential bump weights suppress boundary (and transient) terms,
    so the average converges superpolynomially for Diophantine rotation
    and settles rapidly onto p/q in locked windows.  The orbit length is
    doubled until two successive estimates agree within tol; hitting
    m_max first raises ToleranceNotMetError carrying the best estimate.
    """
    m = 1 << 10
    out: list = []
    _orbit_displacements(f, theta0, m, out)
    est = _weighted_average(np.asarray(out))
    while True:
        if 2 * m > m_max:
            raise ToleranceNotMetError(
                est, float("nan"),
                f"rotation number did not stabilize to {tol:.0e} "
                f"within {m_max} iterates",
            )
        m *= 2
        _orbit_displacements(f, theta0, m, out)
        new = _weighted_average(np.asarray(out))
        diff = abs(new - est)
        est = new
        if diff <= tol:
            return est


def lock_fraction(rho: float, q_max: int = 64, lock_tol: float = 1e-8):
    """Nearest rational p/q with q <= q_max if within lock_tol, else None."""
    cand = Fraction(rho).limit_denominator(q_max)
    if abs(rho - float(cand)) <= lock_tol:
        return cand
    return None


@dataclass(frozen=True)
class SweepRecord:
    param: float
    rho: float
    rho_err: float       # doubling gap, or nan when the cap was hit
    err: float           # invariance residual of the converged circle
    locked: bool


def _solve_rho(circle, f, family, par, tol, max_newton, rho_tol, theta0):
    sol = newton_solve_general(circle, f, family, par, tol, max_newton)
    try:
        rho = rotation_number(sol.f, rho_tol, theta0)
        rho_err = rho_tol
    except ToleranceNotMetError as exc:
        rho, rho_err = exc.best, float("nan")
    return sol, rho, rho_err


# decades of tolerance relaxation tried by a sweep point before it falls
# back to the ambient orbit; the record keeps the residual actually reached
_SWEEP_RELAX_MAX = 2


def _solve_rho_relaxed(circle, f, family, par, tol, max_newton, rho_tol, theta0):
    """_solve_rho with a short tolerance-relaxation ladder.

    Approaching a resonance tongue the pair (K, f) needs more and more
    modes in this gauge, so the achievable grid residual rises and
    Newton stalls just above tol without being wrong.  A relaxed stop
    keeps the point; the returned err is the residual actually reached.
    """
    for relax in range(_SWEEP_RELAX_MAX + 1):
        tol_eff = tol * 10.0 ** relax
        try:
            return _solve_rho(
                circle, f, family, par, tol_eff,
                max_newton, rho_tol, theta0,
            )
        except InversionError:
            if relax == _SWEEP_RELAX_MAX:
                raise
        except DivergenceError as exc:
            if exc.residual > 1e3 * tol_eff or relax == _SWEEP_RELAX_MAX:
                raise
    raise AssertionError("unreachable")


def ambient_rotation_number(
    family: MapFamily,
    par: ParamPoint,
    xy0,
    tol: float = 1e-10,
    m_max: int = 1 << 22,
    transient: int = 256,
) -> float:
    """Rotation number of the forward orbit of xy0 under the ambient map.

    The attractor of a dissipative annulus map is reached geometrically
    fast, so after a short transient the lift displacements x' - x can
    be averaged exactly like the displacements of an internal circle
    map.  Works across resonance tongues where a circle parameterization
    is out of reach; locked windows give p/q to machine accuracy.
    """
    x, y = float(xy0[0]), float(xy0[1])
    for _ in range(transient):
        x, y = family.eval_lift(x, y, par)
    out: list = []

    def extend(count: int) -> None:
        nonlocal x, y
        while len(out) < count:
            x1, y1 = family.eval_lift(x, y, par)
            out.append(x1 - x)
            x, y = float(x1), float(y1)

    m = 1 << 10
    extend(m)
    est = _weighted_average(np.asarray(out))
    while True:
        if 2 * m > m_max:
            raise ToleranceNotMetError(
                est, float("nan"),
                f"ambient rotation number did not stabilize to {tol:.0e} "
                f"within {m_max} iterates",
            )
        m *= 2
        extend(m)
        new = _weighted_average(np.asarray(out))
        diff = abs(new - est)
        est = new
        if diff <= tol:
            return est


def sweep_parameter(
    circle: GridCircle,
    f: InternalMap,
    family: MapFamily,
    par: ParamPoint,
    which: str,
    halfwidth: float,
    step: float,
    *,
    tol: float = 1e-10,
    max_newton: int = 16,
    rho_tol: float = 1e-10,
    lock_tol: float = 1e-8,
    q_max: int = 64,
    refine_width: float = 1e-4,
    theta0: float = 0.0,
) -> list[SweepRecord]:
    """Rotation number versus a or mu around the given parameter point.

    Walks outward from the center in both directions with warm restarts,
    then bisects every locked/unlocked boundary until the bracketing
    parameter gap is below refine_width, so plateau edges are resolved.
    A direction stops early if Newton fails; everything found so far is
    kept.  Records are returned sorted by parameter.
    """
    if which not in ("a", "mu"):
        raise ValueError(f"sweep parameter must be 'a' or 'mu', got {which!r}")
    center = getattr(par, which)

    solutions: dict[float, GeneralSolution] = {}
    records: dict[float, SweepRecord] = {}

    def solve_at(value: float, start: GeneralSolution | None):
        par_v = par.replace(**{which: value})
        c0 = start.circle if start else circle
        f0 = start.f if start else f
        try:
            sol, rho, rho_err = _solve_rho_relaxed(
                c0, f0, family, par_v, tol, max_newton, rho_tol, theta0
            )
            err = sol.err
        except NtCircleError:
            # inside (or hugging) a resonance tongue the circle-map pair
            # stops being reachable on any sensible grid; the rotation
            # number itself is still well defined on the attractor, so
            # take it from the ambient orbit and keep the last circle
            # as the warm start for later points
            sol, err = start, float("nan")
            xy0 = (c0.eta_x[0], c0.k_y[0])
            try:
                rho = ambient_rotation_number(family, par_v, xy0, rho_tol)
                rho_err = rho_tol
            except ToleranceNotMetError as exc:
                rho, rho_err = exc.best, float("nan")
        if sol is not None:
            solutions[value] = sol
        records[value] = SweepRecord(
            value, rho, rho_err, err,
            lock_fraction(rho, q_max, lock_tol) is not None,
        )
        return sol

    base = solve_at(center, None)
    steps = int(math.floor(halfwidth / step + 1e-9))
    for sign in (1.0, -1.0):
        prev = base
        for j in range(1, steps + 1):
            value = center + sign * j * step
            try:
                prev = solve_at(value, prev)
            except NtCircleError:
                break   # report the last good point of this direction

    # bisection refinement of every locking boundary
    pending = True
    guard = 0
    while pending and guard < 200:
        pending = False
        guard += 1
        keys = sorted(records)
        for lo, hi in zip(keys, keys[1:]):
            if records[lo].locked == records[hi].locked:
                continue
            if hi - lo <= refine_width:
                continue
            mid = 0.5 * (lo + hi)
            try:
                solve_at(mid, solutions.get(lo))
            except NtCircleError:
                try:
                    solve_at(mid, solutions.get(hi))
                except NtCircleError:
                    continue
            pending = True
            break
    return [records[k] for k in sorted(records)]


def induced_internal_map(
    circle: GridCircle, family: MapFamily, par: ParamPoint,
    tol: float = 1e-13, max_iter: int = 60,
) -> InternalMap:
    """Internal dynamics read off an (approximately) invariant circle.

    Solves K_x(phi_j) = F_x(K(theta_j)) on lifts for each node, giving
    the displacement of the conjugated map f = K^{-1} o F o K in the
    x-coordinate.  Meaningful when the circle is close to invariant.
    """
    n = circle.n
    p = circle.order
    theta = np.arange(n) / n
    fx, _ = family.eval_lift(theta + circle.eta_x, circle.k_y, par)
    d_eta = grid_derivative(circle.eta_x, p)
    phi = fx - float(np.mean(circle.eta_x))
    for _ in range(max_iter):
        res = phi + interp(circle.eta_x, phi, p) - fx
        if float(np.max(np.abs(res))) < tol:
            break
        slope = 1.0 + interp(d_eta, phi, p)
        phi = phi - res / np.maximum(slope, 0.05)
    else:
        raise InversionError("conjugacy solve did not converge")
    return InternalMap(phi - theta, p)
