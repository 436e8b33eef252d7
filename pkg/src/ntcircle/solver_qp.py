"""Newton continuation of quasi-periodic invariant circles, fixed rotation.

Unknowns are the embedding K, the unfolding parameter a and the drift mu;
the rotation number omega and the twist level b_a0 are prescribed.  Each
iteration reduces the linearized invariance equation to two scalar
cohomological equations in the adapted frame, fixes mu from the average
of the tangent component, and closes the remaining scalar condition
b_a(K, a, mu) = b_a0 with a derivative-free Steffensen update in a.  The
solve is exact to first order, so convergence is quadratic.

At a = 0 with the odd-symmetric forcing, b_a = 2a places the circle at
the extremum of the rotation-number profile: these are the non-twist
(shearless) circles.  Prescribing b_a0 != 0 selects circles off the
extremum and sweeping b_a0 charts the twist surface.

Compositions with the map are dealiased with the 1/3 truncation, and the
invariance residual is measured on the filtered system; spectral
exhaustion is monitored on the raw compositions and drives the dyadic
mode adaptation during continuation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import fourier
from .errors import (
    DivergenceError,
    MuDegeneracyError,
    NtCircleError,
    TwistDegeneracyError,
)
from .fourier import PeriodicScalar
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
    vartheta_qp,
)
from .maps import MapFamily, ParamPoint

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

_TWIST_SLOPE_FLOOR = 1e-8
_DRIFT_FLOOR = 1e-8
_BLOWUP_FACTOR = 1e3
_LEVEL_SUSPECT = 100.0   # step floor above this * tol: distrust the level


@dataclass(frozen=True)
class QpProblem:
    """Problem data and policies for one circle family."""

    family: MapFamily
    omega: float = GOLDEN_MEAN
    b_a0: float = 0.0
    tol: float = 1e-11            # invariance residual, sup-norm
    tol_phase: float = 1e-11      # |<eta_x>|
    tol_twist: float = 1e-11      # |b_a - b_a0|
    n_min: int = 64
    n_max: int = 1 << 19
    tail_double: float = 1e-9     # raw-composition tail above this: refine
    tail_halve: float = 1e-16     # below this: try to coarsen
    max_newton: int = 20
    floor_factor: float = 1e4     # accept a residual floor up to this * tol


@dataclass(frozen=True)
class QpState:
    """A circle candidate (converged when diagnostics is set)."""

    k: TorusEmbedding
    a: float
    mu: float
    eps: float
    diagnostics: Diagnostics | None = None
    history: tuple[float, ...] = ()
    iterations: int = 0

    @classmethod
    def flat_start(cls, n: int, omega: float, b_a0: float = 0.0) -> "QpState":
        """Exact eps = 0 circle: y = 0, a = b_a0/2, mu = omega - a^2."""
        a = b_a0 / 2.0
        return cls(TorusEmbedding.zero_section(n), a, omega - a * a, 0.0)


@dataclass(frozen=True)
class ContinuationRecord:
    """One accepted continuation point, ready for serialization."""

    eps: float
    a: float
    mu: float
    n: int
    err: float
    alpha: float
    b_a: float
    b_mu: float
    iters: int
    wall_ms: float


@dataclass(frozen=True)
class ContinuationPolicy:
    """Step control for continuation in eps."""

    step_init: float = 0.01
    step_min: float = 1e-6
    step_max: float = 0.1
    grow_after: int = 3           # consecutive accepts before doubling
    alpha_floor: float = 1e-4     # stop when the frame angle drops below
    probe: float = 1e-6           # finite-difference probe for d/d eps
    timing: bool = False          # keep wall_ms at 0 for reproducible output


@dataclass(frozen=True)
class ContinuationResult:
    records: tuple[ContinuationRecord, ...]
    reason: str                   # target / alpha-floor / step-floor / n-max
    state: QpState | None


class NewtonWorkspace:
    """All fields of one linearization, shared by step and closure.

    E is the dealiased invariance residual, (eta_l, eta_n) its projection
    -P(theta+omega)^{-1} E on the frame, and the b-fields the matching
    projections of the parameter directions D_a F and D_mu F.
    """

    __slots__ = (
        "k", "a", "mu", "eps", "frame", "dfk", "d_a", "d_mu",
        "nx_s", "ny_s", "lx_s", "ly_s",
        "ex", "ey", "err", "e_p", "e_b",
        "eta_l", "eta_n", "bla", "bna", "blm", "bnm",
        "b_a", "b_mu", "alpha", "tail",
    )


def _composition_fields(family: MapFamily, k: TorusEmbedding, par: ParamPoint):
    """Map data along the circle: dealiased compositions plus raw tail."""
    x = k.x_lift()
    y = k.k_y.values
    fx_lift, fy = family.eval_lift(x, y, par)
    ux = fx_lift - fourier.grid(k.n)   # periodic part of F^x
    raw_x = PeriodicScalar(ux)
    raw_y = PeriodicScalar(fy)
    tail = max(
        fourier.tail_fraction(raw_x, 0.25), fourier.tail_fraction(raw_y, 0.25)
    )
    jac = family.jacobian(x, y, par)
    dfk = tuple(
        tuple(fourier.dealias(PeriodicScalar(jac[i, j])) for j in range(2))
        for i in range(2)
    )
    dax, day = family.d_a(x, y, par)
    dmx, dmy = family.d_mu(x, y, par)
    return {
        "fx": fourier.dealias(raw_x),
        "fy": fourier.dealias(raw_y),
        "tail": tail,
        "dfk": dfk,
        "d_a": (fourier.dealias(PeriodicScalar(dax)),
                fourier.dealias(PeriodicScalar(day))),
        "d_mu": (fourier.dealias(PeriodicScalar(dmx)),
                 fourier.dealias(PeriodicScalar(dmy))),
    }


def _geometry(problem: QpProblem, k, a, mu, eps) -> NewtonWorkspace:
    """Frame, twists and parameter projections at (K, a, mu, eps)."""
    fields = _composition_fields(problem.family, k, ParamPoint(a, mu, eps))
    om = problem.omega
    sig = problem.family.sigma
    l = tangent(k)
    n0, gram = normal0(l)
    t0 = torsion0(n0, fields["dfk"], om)
    vth = vartheta_qp(t0, sig, om)
    fr = assemble_frame(l, n0, gram, t0, vth, sig)

    ws = NewtonWorkspace()
    ws.k, ws.a, ws.mu, ws.eps = k, a, mu, eps
    ws.frame = fr
    ws.dfk = fields["dfk"]
    ws.d_a = fields["d_a"]
    ws.d_mu = fields["d_mu"]
    ws.tail = fields["tail"]
    ws.alpha = min_angle(vth, gram)
    ws.nx_s = fourier.shift(fr.nvec[0], om)
    ws.ny_s = fourier.shift(fr.nvec[1], om)
    ws.lx_s = fourier.shift(fr.l[0], om)
    ws.ly_s = fourier.shift(fr.l[1], om)

    dax, day = ws.d_a
    dmx, dmy = ws.d_mu
    ws.bla = ws.ny_s * dax - ws.nx_s * day
    ws.bna = -(ws.ly_s * dax - ws.lx_s * day)
    ws.blm = ws.ny_s * dmx - ws.nx_s * dmy
    ws.bnm = -(ws.ly_s * dmx - ws.lx_s * dmy)
    ws.b_a = fourier.average(ws.bla)
    ws.b_mu = fourier.average(ws.blm)

    ws.ex = fields["fx"] - om - fourier.shift(k.eta_x, om)
    ws.ey = fields["fy"] - fourier.shift(k.k_y, om)
    ws.err = max(ws.ex.sup(), ws.ey.sup())
    ws.e_p = fourier.average(k.eta_x)
    ws.e_b = ws.b_a - problem.b_a0

    ws.eta_l = -(ws.ny_s * ws.ex - ws.nx_s * ws.ey)
    ws.eta_n = ws.ly_s * ws.ex - ws.lx_s * ws.ey
    return ws


def frame_fields(problem: QpProblem, state: QpState):
    """Circle and normal-bundle samples for export: theta, Kx, Ky, Nx, Ny."""
    ws = _geometry(problem, state.k, state.a, state.mu, state.eps)
    th = fourier.grid(state.k.n)
    return (
        th,
        th + state.k.eta_x.values,
        state.k.k_y.values,
        ws.frame.nvec[0].values,
        ws.frame.nvec[1].values,
    )


def residuals(problem: QpProblem, state: QpState):
    """Invariance residual (x and y parts), phase error and twist error."""
    ws = _geometry(problem, state.k, state.a, state.mu, state.eps)
    return ws.ex, ws.ey, ws.e_p, ws.e_b


def _solve_linear(problem, ws, eta_l, eta_n, delta_a, phase):
    """Frame-coordinate solve for a given delta_a; returns the update.

    delta_mu kills the average of the tangent equation; the tangent
    constant is chosen so the x-average of the updated embedding is
    -phase (the phase lock).  Returns (d_eta_x, d_ky, delta_mu).
    """
    om = problem.omega
    sig = problem.family.sigma
    if abs(ws.b_mu) < _DRIFT_FLOOR:
        raise MuDegeneracyError(
            f"drift average b_mu = {ws.b_mu:.3e} below {_DRIFT_FLOOR:.0e}"
        )
    delta_mu = (fourier.average(eta_l) - ws.b_a * delta_a) / ws.b_mu
    rhs_n = eta_n - ws.bna * delta_a - ws.bnm * delta_mu
    xi_n = fourier.solve_contractive(rhs_n, sig, om)
    rhs_l = eta_l - ws.bla * delta_a - ws.blm * delta_mu
    xi_l, _ = fourier.solve_small_divisor(rhs_l, om)
    lx, ly = ws.frame.l
    nx, ny = ws.frame.nvec
    const = -phase - fourier.average(lx * xi_l + nx * xi_n)
    xi_l = xi_l + const
    # keep the embedding in the retained band: outside it the filtered
    # composition exerts no feedback and the correction loop is unstable
    return (
        fourier.dealias(lx * xi_l + nx * xi_n),
        fourier.dealias(ly * xi_l + ny * xi_n),
        delta_mu,
    )


def newton_step_given_da(problem: QpProblem, ws: NewtonWorkspace, delta_a: float):
    """Correction (d_eta_x, d_ky, delta_mu) for a prescribed delta_a."""
    return _solve_linear(problem, ws, ws.eta_l, ws.eta_n, delta_a, ws.e_p)


def _candidate_twist(problem: QpProblem, ws, delta_a: float) -> float:
    """b_a after applying the correction with this delta_a."""
    d_eta, d_ky, delta_mu = newton_step_given_da(problem, ws, delta_a)
    kc = TorusEmbedding(ws.k.eta_x + d_eta, ws.k.k_y + d_ky)
    cand = _geometry(problem, kc, ws.a + delta_a, ws.mu + delta_mu, ws.eps)
    return cand.b_a


def steffensen_update(problem: QpProblem, ws: NewtonWorkspace) -> float:
    """Root delta_a of g(delta_a) = b_a[after step] - b_a0.

    Derivative-free: probes at h = g(0), so the probe shrinks with the
    residual and the overall iteration stays quadratic.
    """
    g0 = _candidate_twist(problem, ws, 0.0) - problem.b_a0
    if abs(g0) < 1e-14 * max(1.0, abs(problem.b_a0)):
        return 0.0
    h = g0
    gh = _candidate_twist(problem, ws, h) - problem.b_a0
    slope = (gh - g0) / h
    if abs(slope) < _TWIST_SLOPE_FLOOR:
        raise TwistDegeneracyError(
            f"twist sensitivity d b_a / d a = {slope:.3e} below "
            f"{_TWIST_SLOPE_FLOOR:.0e}; the twist closure cannot pin a"
        )
    return -g0 / slope


def _diagnostics(problem: QpProblem, ws: NewtonWorkspace) -> Diagnostics:
    _, red_sup = reducibility_error(ws.frame, ws.dfk, problem.omega)
    return Diagnostics(
        invariance_error=ws.err,
        reducibility_error=red_sup,
        min_angle=ws.alpha,
        twist_a=ws.b_a,
        twist_mu=ws.b_mu,
        contraction=problem.family.sigma,
        tail=ws.tail,
        modes=ws.k.n,
    )


def newton_solve(problem: QpProblem, state: QpState) -> QpState:
    """Iterate to tolerance at fixed eps; raises DivergenceError if lost.

    The iteration has a structural floor: truncation error at the
    retained-band boundary is recycled through the small divisors there
    and pumped instead of contracted, so below some level the residual
    stops improving no matter how many steps run.  A floor within
    floor_factor * tol on a spectrally resolved circle (thin raw tail,
    phase and twist closed) is returned as a success with its true
    residual in the diagnostics; only floors above that window, fat
    tails, or genuine blow-ups raise.
    """
    # project the start onto the retained band; corrections stay there
    k = TorusEmbedding(
        fourier.dealias(state.k.eta_x), fourier.dealias(state.k.k_y)
    )
    a, mu, eps = state.a, state.mu, state.eps
    ws = _geometry(problem, k, a, mu, eps)
    history: list[float] = [ws.err]
    # re-entry with a state this solver already accepted at its floor
    # must be a no-op, not a doomed attempt to beat the floor again
    if (
        state.diagnostics is not None
        and ws.err <= problem.floor_factor * problem.tol
        and ws.tail <= problem.tail_double
        and abs(ws.e_p) <= problem.tol_phase
        and abs(ws.e_b) <= problem.tol_twist
    ):
        return QpState(
            k, a, mu, eps,
            diagnostics=_diagnostics(problem, ws),
            history=tuple(history),
            iterations=0,
        )
    scale0 = max(ws.err, abs(ws.e_p), abs(ws.e_b))
    best, best_tail, stale = ws.err, ws.tail, 0
    snap = None    # best iterate with phase and twist closed
    for it in range(problem.max_newton + 1):
        if (
            ws.err <= problem.tol
            and abs(ws.e_p) <= problem.tol_phase
            and abs(ws.e_b) <= problem.tol_twist
        ):
            return QpState(
                k, a, mu, eps,
                diagnostics=_diagnostics(problem, ws),
                history=tuple(history),
                iterations=it,
            )
        if it == problem.max_newton:
            break
        if ws.err > _BLOWUP_FACTOR * (scale0 + problem.tol):
            raise DivergenceError(
                f"residual blew up to {ws.err:.3e} from {history[0]:.3e}",
                residual=ws.err,
            )
        delta_a = steffensen_update(problem, ws)
        d_eta, d_ky, delta_mu = newton_step_given_da(problem, ws, delta_a)
        # damped acceptance: a fractional step restores descent when the
        # full-step iteration turns into a neutral oscillation, which
        # happens when near-resonant modes enter the retained band; the
        # candidate geometry is reused, so the clean path pays nothing
        t = 1.0
        while True:
            k2 = TorusEmbedding(k.eta_x + t * d_eta, k.k_y + t * d_ky)
            ws2 = _geometry(problem, k2, a + t * delta_a,
                            mu + t * delta_mu, eps)
            if ws2.err <= 1.2 * ws.err or t <= 0.25:
                break
            t *= 0.5
        k, a, mu, ws = k2, a + t * delta_a, mu + t * delta_mu, ws2
        history.append(ws.err)
        if (
            abs(ws.e_p) <= problem.tol_phase
            and abs(ws.e_b) <= problem.tol_twist
            and (snap is None or ws.err < snap[4].err)
        ):
            snap = (k, a, mu, it + 1, ws)
        if ws.err < best:
            best, best_tail, stale = ws.err, ws.tail, 0
        elif ws.err > problem.tol:
            stale += 1
            if stale >= 6 or (stale >= 3 and ws.err >= 2.0 * best):
                break   # pumping, not contracting; settle on the floor
    if (
        snap is not None
        and snap[4].err <= problem.floor_factor * problem.tol
        and snap[4].tail <= problem.tail_double
    ):
        k, a, mu, it_s, ws = snap
        return QpState(
            k, a, mu, eps,
            diagnostics=_diagnostics(problem, ws),
            history=tuple(history),
            iterations=it_s,
        )
    raise DivergenceError(
        f"no convergence in {problem.max_newton} iterations, "
        f"best residual {best:.3e}, phase {ws.e_p:.3e}, twist {ws.e_b:.3e}",
        residual=best, tail=best_tail,
    )


@dataclass(frozen=True)
class EpsDerivative:
    """Tangent of the solution branch with respect to eps."""

    d_eta_x: PeriodicScalar
    d_ky: PeriodicScalar
    d_a: float
    d_mu: float


def eps_derivative(
    problem: QpProblem, state: QpState, probe: float = 1e-6
) -> EpsDerivative:
    """Differentiate the branch (K, a, mu)(eps) at a converged state.

    The linear solve mirrors the Newton step with D_eps F as the data and
    zero phase drift.  The twist constraint d b_a / d eps = 0 fixes the
    d_a component; its value is found from a finite-difference directional
    probe of b_a at distance `probe` along the candidate direction, made
    affine-exact by one secant step.
    """
    ws = _geometry(problem, state.k, state.a, state.mu, state.eps)
    x = state.k.x_lift()
    y = state.k.k_y.values
    par = ParamPoint(state.a, state.mu, state.eps)
    dex, dey = problem.family.d_eps(x, y, par)
    ex = fourier.dealias(PeriodicScalar(dex))
    ey = fourier.dealias(PeriodicScalar(dey))
    eta_l = -(ws.ny_s * ex - ws.nx_s * ey)
    eta_n = ws.ly_s * ex - ws.lx_s * ey

    def direction(d_a: float):
        return _solve_linear(problem, ws, eta_l, eta_n, d_a, 0.0)

    def twist_rate(d_a: float) -> float:
        d_eta, d_ky, d_mu = direction(d_a)
        kc = TorusEmbedding(
            state.k.eta_x + probe * d_eta, state.k.k_y + probe * d_ky
        )
        cand = _geometry(
            problem, kc,
            state.a + probe * d_a,
            state.mu + probe * d_mu,
            state.eps + probe,
        )
        return (cand.b_a - ws.b_a) / probe

    g0 = twist_rate(0.0)
    if abs(g0) < 1e-9:
        d_a = 0.0
    else:
        h = g0
        gh = twist_rate(h)
        slope = (gh - g0) / h
        if abs(slope) < _TWIST_SLOPE_FLOOR:
            raise TwistDegeneracyError(
                f"twist sensitivity {slope:.3e} too small for the "
                f"eps-derivative closure"
            )
        d_a = -g0 / slope
    d_eta, d_ky, d_mu = direction(d_a)
    return EpsDerivative(d_eta, d_ky, d_a, d_mu)


def _record(state: QpState, wall_ms: float) -> ContinuationRecord:
    d = state.diagnostics
    return ContinuationRecord(
        eps=state.eps, a=state.a, mu=state.mu, n=state.k.n,
        err=d.invariance_error, alpha=d.min_angle,
        b_a=d.twist_a, b_mu=d.twist_mu,
        iters=state.iterations, wall_ms=wall_ms,
    )


def _grow_base(problem: QpProblem, state: QpState) -> QpState | None:
    """Rebuild state on the next dyadic grid that converges cleanly.

    Levels whose retained-band edge sits near a resonance refuse the
    strict tolerance and are skipped; None when no level up to n_max
    takes.
    """
    picky = replace(problem, floor_factor=min(10.0, problem.floor_factor))
    n2 = 2 * state.k.n
    while n2 <= problem.n_max:
        try:
            return newton_solve(picky, replace(state, k=state.k.resample(n2)))
        except (NtCircleError, ValueError):
            n2 *= 2
    return None


def _adapt_modes(problem: QpProblem, state: QpState) -> tuple[QpState, bool]:
    """Double/halve the grid by the raw-tail policy; True if n_max binds.

    Doubling skips dyadic levels that refuse to converge (a band edge
    near a resonance) and gives up gracefully when no level absorbs the
    tail: the state is valid as is, just under-resolved, and the caller
    retries on later steps.  Rebuilt bases are held near the strict
    tolerance; a level that can only offer a high residual floor would
    poison every later predictor, so it is skipped.
    """
    picky = replace(
        problem, floor_factor=min(10.0, problem.floor_factor)
    )
    for _ in range(10):
        tail = state.diagnostics.tail
        n = state.k.n
        if tail > problem.tail_double:
            if 2 * n > problem.n_max:
                return state, True
            grown = None
            n2 = 2 * n
            while n2 <= problem.n_max and grown is None:
                try:
                    grown = newton_solve(
                        picky, replace(state, k=state.k.resample(n2))
                    )
                except NtCircleError:
                    n2 *= 2
            if grown is None:
                return state, False
            state = grown
            continue
        if tail < problem.tail_halve and n > problem.n_min:
            try:
                trial = newton_solve(
                    picky, replace(state, k=state.k.resample(n // 2))
                )
            except NtCircleError:
                break
            if trial.diagnostics.tail <= problem.tail_double:
                state = trial
                continue
        break
    return state, False


def continue_in_eps(
    problem: QpProblem,
    state: QpState,
    eps_target: float,
    policy: ContinuationPolicy | None = None,
) -> ContinuationResult:
    """March the branch from state.eps to eps_target.

    Tangent predictor, Newton corrector, dyadic mode adaptation; the step
    halves on any solver failure and doubles after `grow_after` accepts.
    Stops on the target, on loss of frame transversality (alpha below the
    floor), when the step underflows, or when n_max is reached; the
    records of all accepted points and the stop reason are returned.
    """
    if policy is None:
        policy = ContinuationPolicy()
    t0 = time.perf_counter() if policy.timing else 0.0
    state = newton_solve(problem, state)
    state, nmax_hit = _adapt_modes(problem, state)
    wall = (time.perf_counter() - t0) * 1e3 if policy.timing else 0.0
    records = [_record(state, wall)]
    if nmax_hit:
        return ContinuationResult(tuple(records), "n-max", state)

    step = policy.step_init
    streak = 0
    reason = "target"
    while True:
        if state.eps >= eps_target - 1e-15:
            break
        if state.diagnostics.min_angle < policy.alpha_floor:
            reason = "alpha-floor"
            break
        try:
            der = eps_derivative(problem, state, policy.probe)
        except NtCircleError:
            der = None   # zero-order continuation still works
        accepted = False
        grows = 0   # base rebuilds spent on this step
        while not accepted:
            d = min(step, eps_target - state.eps)
            t0 = time.perf_counter() if policy.timing else 0.0
            if der is None:
                pred = replace(state, eps=state.eps + d, diagnostics=None)
            else:
                pred = QpState(
                    TorusEmbedding(
                        state.k.eta_x + d * der.d_eta_x,
                        state.k.k_y + d * der.d_ky,
                    ),
                    state.a + d * der.d_a,
                    state.mu + d * der.d_mu,
                    state.eps + d,
                )
            try:
                new = newton_solve(problem, pred)
                if (
                    grows < 3
                    and new.diagnostics.invariance_error
                    > _LEVEL_SUSPECT * problem.tol
                ):
                    # the step settled on a high floor over a thin tail:
                    # this dyadic level recycles band-edge error, so redo
                    # the step from a finer base instead of letting the
                    # degraded state poison later predictors
                    grown = _grow_base(problem, state)
                    if grown is not None:
                        grows += 1
                        state = grown
                        try:
                            der = eps_derivative(problem, state,
                                                 policy.probe)
                        except NtCircleError:
                            der = None
                        continue
                new, nmax_hit = _adapt_modes(problem, new)
            except (NtCircleError, ValueError) as exc:
                # a small-residual failure with a fat spectral tail means
                # the base no longer resolves the circle: rebuild it on a
                # finer grid and retry the step.  Everything else
                # (blow-ups, floors above the acceptance window) is a
                # step problem: halve.
                resid = getattr(exc, "residual", float("inf"))
                tail = getattr(exc, "tail", float("nan"))
                grown = None
                if (
                    grows < 3
                    and isinstance(exc, DivergenceError)
                    and resid <= 1e-3
                    and tail > problem.tail_double
                ):
                    grown = _grow_base(problem, state)
                if grown is not None:
                    grows += 1
                    state = grown
                    try:
                        der = eps_derivative(problem, state, policy.probe)
                    except NtCircleError:
                        der = None
                    continue
                step /= 2.0
                streak = 0
                if step < policy.step_min:
                    reason = "step-floor"
                    break
                continue
            wall = (time.perf_counter() - t0) * 1e3 if policy.timing else 0.0
            state = new
            records.append(_record(state, wall))
            accepted = True
        if not accepted:
            break
        if nmax_hit:
            reason = "n-max"
            break
        streak += 1
        if streak >= policy.grow_after:
            step = min(2.0 * step, policy.step_max)
            streak = 0
    return ContinuationResult(tuple(records), reason, state)


@dataclass(frozen=True)
class BreakdownFit:
    """Linear extrapolation of the frame angle to its zero crossing."""

    eps_c: float
    slope: float
    residual: float
    reliable: bool
    window: int


def breakdown_extrapolate(
    records, window: int = 20, min_points: int = 5
) -> BreakdownFit:
    """Fit alpha = m*eps + c on the final stretch and report eps_c = -c/m.

    The window is the last decade of alpha (points with alpha within
    10x of the final one) or the last `window` records, whichever is
    smaller, widened to at least `min_points` records when the final
    collapse is too abrupt to populate the decade.  The fit is reliable only when the window actually shrinks:
    monotone non-increasing, a real net drop, and a negative slope.
    Anything else degrades to reliable=False; the numbers are still
    returned.
    """
    eps = np.array([r.eps for r in records], dtype=float)
    alpha = np.array([r.alpha for r in records], dtype=float)
    if alpha.size:
        above = np.nonzero(alpha > 10.0 * alpha[-1])[0]
        start = int(above[-1]) + 1 if above.size else 0
        if alpha.size - start < min_points:
            # abrupt final collapse: too few points in the last decade
            start = max(0, alpha.size - min_points)
        eps, alpha = eps[start:], alpha[start:]
    if eps.size > window:
        eps, alpha = eps[-window:], alpha[-window:]
    if eps.size < min_points:
        raise ValueError(
            f"need at least {min_points} records in the fit window, "
            f"have {eps.size}"
        )
    m, c = np.polyfit(eps, alpha, 1)
    fitted = m * eps + c
    rms = float(np.sqrt(np.mean((fitted - alpha) ** 2)))
    monotone = bool(np.all(np.diff(alpha) <= 1e-12))
    # a flat stretch fits with slope ~ -1e-17; demand a real decrease
    shrinking = alpha[0] - alpha[-1] > 1e-12
    reliable = monotone and shrinking and m < 0.0
    eps_c = -c / m if m < 0.0 else float("nan")
    return BreakdownFit(float(eps_c), float(m), rms, reliable, int(eps.size))


@dataclass(frozen=True)
class SurfacePath:
    b_a0: float
    result: ContinuationResult


def twist_surface(
    problem: QpProblem,
    b_a0_values,
    eps_target: float,
    policy: ContinuationPolicy | None = None,
    threads: int = 1,
) -> list[SurfacePath]:
    """Continue one circle branch per twist level b_a0, each from eps = 0.

    Paths are independent; with threads > 1 they run on a thread pool.
    The output order follows b_a0_values regardless of scheduling, and
    each path is bitwise identical to a lone continue_in_eps call.
    """

    def run(b: float) -> SurfacePath:
        prob = replace(problem, b_a0=b)
        start = QpState.flat_start(prob.n_min, prob.omega, b)
        try:
            res = continue_in_eps(prob, start, eps_target, policy)
        except NtCircleError as exc:
            res = ContinuationResult((), f"error: {exc}", None)
        return SurfacePath(b, res)

    values = [float(b) for b in b_a0_values]
    if threads <= 1:
        return [run(b) for b in values]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, values))
