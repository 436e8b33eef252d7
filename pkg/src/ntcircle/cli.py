"""Command-line driver: flat key=value configs in, CSV tables out.

Commands
--------
continue-nontwist   march a non-twist circle branch in eps; writes
                    path.csv and final_circle.csv
breakdown           push the branch to breakdown and extrapolate the
                    bundle-angle zero crossing; writes alpha.csv, fit.txt
rotnum-sweep        rotation number versus a or mu around a converged
                    circle; writes rho_vs_param.csv
twist-surface       one branch per prescribed twist level b_a0; writes
                    surface.csv
verify              self-check battery; prints PASS/FAIL lines

Exit codes: 0 success, 2 continuation stopped before the target
(breakdown-type stop), 1 error.  All floats are serialized with 17
significant digits so the tables re-parse to the exact binary values,
and rerunning a command with threads=1 reproduces the files byte for
byte (timing is off by default; wall_ms written as 0.0).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from . import fourier
from .errors import NtCircleError
from .frame import TorusEmbedding, tangent, normal0, reducibility_error
from .maps import Forcing, ParamPoint, StandardNonTwistMap, check_symmetry
from .solver_general import (
    GridCircle,
    InternalMap,
    rotation_number,
    sweep_parameter,
)
from .solver_qp import (
    GOLDEN_MEAN,
    ContinuationPolicy,
    QpProblem,
    QpState,
    breakdown_extrapolate,
    continue_in_eps,
    frame_fields,
    newton_solve,
    twist_surface,
)

ENV_OUT_DIR = "NTCIRCLE_OUT_DIR"


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Flat run configuration; every key has a usable default."""

    family: str = "dsntm"
    variant: str = "symmetric"
    sigma: float = 0.8
    omega: float = GOLDEN_MEAN     # config accepts a literal or `golden`
    b_a0: float = 0.0
    eps_target: float = 2.0
    step_init: float = 0.01
    step_min: float = 1e-6
    step_max: float = 0.1
    grow_after: int = 3
    alpha_floor: float = 1e-4
    probe: float = 1e-6
    tol: float = 1e-11
    tol_phase: float = 1e-11
    tol_twist: float = 1e-11
    max_newton: int = 20
    n_min: int = 64
    n_max: int = 1 << 19
    tail_double: float = 1e-9
    tail_halve: float = 1e-16
    out_dir: str = "."
    seed: int = 0
    threads: int = 1
    timing: bool = False
    # breakdown
    fit_window: int = 20
    alpha_input: str = ""          # fit a ready-made (eps, alpha) table instead
    # rotation-number sweep
    sweep_which: str = "a"
    sweep_halfwidth: float = 0.1
    sweep_step: float = 0.004
    sweep_grid: int = 8192
    sweep_order: int = 4
    sweep_tol: float = 1e-9
    rho_tol: float = 1e-10
    lock_tol: float = 1e-8
    q_max: int = 64
    refine_width: float = 1e-4
    # twist surface
    b_a0_list: tuple = (0.0,)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "on", "yes"):
        return True
    if low in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_omega(text: str) -> float:
    if text.strip().lower() == "golden":
        return GOLDEN_MEAN
    return float(text)


def _parse_float_list(text: str) -> tuple:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(t) for t in items)


_CASTERS = {
    "family": str,
    "variant": str,
    "sigma": float,
    "omega": _parse_omega,
    "b_a0": float,
    "eps_target": float,
    "step_init": float,
    "step_min": float,
    "step_max": float,
    "grow_after": int,
    "alpha_floor": float,
    "probe": float,
    "tol": float,
    "tol_phase": float,
    "tol_twist": float,
    "max_newton": int,
    "n_min": int,
    "n_max": int,
    "tail_double": float,
    "tail_halve": float,
    "out_dir": str,
    "seed": int,
    "threads": int,
    "timing": _parse_bool,
    "fit_window": int,
    "alpha_input": str,
    "sweep_which": str,
    "sweep_halfwidth": float,
    "sweep_step": float,
    "sweep_grid": int,
    "sweep_order": int,
    "sweep_tol": float,
    "rho_tol": float,
    "lock_tol": float,
    "q_max": int,
    "refine_width": float,
    "b_a0_list": _parse_float_list,
}

assert set(_CASTERS) == {f.name for f in fields(RunConfig)}


def parse_config(text: str) -> RunConfig:
    """Parse key=value lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CASTERS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CASTERS[key](val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from exc
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Eager checks; deeper preconditions are enforced by the modules."""
    if cfg.family != "dsntm":
        raise ValueError(f"unknown family {cfg.family!r} (supported: dsntm)")
    if cfg.variant not in (Forcing.SYMMETRIC, Forcing.NONSYMMETRIC):
        raise ValueError(f"unknown forcing variant {cfg.variant!r}")
    if not 0.0 < cfg.sigma < 1.0:
        raise ValueError(f"need sigma in (0, 1), got {cfg.sigma}")
    if not 0.0 < cfg.omega < 1.0:
        raise ValueError(f"need omega in (0, 1), got {cfg.omega}")
    if cfg.eps_target < 0.0:
        raise ValueError("eps_target must be nonnegative")
    for key in ("step_init", "step_min", "step_max", "probe", "tol",
                "tol_phase", "tol_twist", "alpha_floor", "tail_double",
                "tail_halve", "sweep_halfwidth", "sweep_step", "sweep_tol",
                "rho_tol", "lock_tol", "refine_width"):
        if getattr(cfg, key) <= 0.0:
            raise ValueError(f"{key} must be positive")
    if not cfg.step_min <= cfg.step_init <= cfg.step_max:
        raise ValueError("need step_min <= step_init <= step_max")
    for key in ("grow_after", "max_newton", "threads", "q_max"):
        if getattr(cfg, key) < 1:
            raise ValueError(f"{key} must be at least 1")
    if cfg.seed < 0:
        raise ValueError("seed must be nonnegative")
    if cfg.n_min > cfg.n_max:
        raise ValueError("need n_min <= n_max")
    if cfg.sweep_which not in ("a", "mu"):
        raise ValueError(f"sweep_which must be 'a' or 'mu', got {cfg.sweep_which!r}")
    if cfg.sweep_order not in (2, 4, 6, 8):
        raise ValueError("sweep_order must be one of 2, 4, 6, 8")


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_family(cfg: RunConfig) -> StandardNonTwistMap:
    return StandardNonTwistMap(cfg.sigma, Forcing(cfg.variant))


def build_problem(cfg: RunConfig) -> QpProblem:
    return QpProblem(
        build_family(cfg),
        omega=cfg.omega,
        b_a0=cfg.b_a0,
        tol=cfg.tol,
        tol_phase=cfg.tol_phase,
        tol_twist=cfg.tol_twist,
        n_min=cfg.n_min,
        n_max=cfg.n_max,
        tail_double=cfg.tail_double,
        tail_halve=cfg.tail_halve,
        max_newton=cfg.max_newton,
    )


def build_policy(cfg: RunConfig) -> ContinuationPolicy:
    return ContinuationPolicy(
        step_init=cfg.step_init,
        step_min=cfg.step_min,
        step_max=cfg.step_max,
        grow_after=cfg.grow_after,
        alpha_floor=cfg.alpha_floor,
        probe=cfg.probe,
        timing=cfg.timing,
    )


# ---------------------------------------------------------------------------
# persistence


def _fmt(value) -> str:
    """One CSV cell; floats at 17 significant digits (exact round trip)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_alpha_csv(path: str):
    """Parse a two-column (eps, alpha) table with a header row."""
    out = []
    with open(path, "r", encoding="ascii") as fh:
        next(fh)                           # header
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            out.append(_AlphaPoint(float(parts[0]), float(parts[1])))
    return out


@dataclass(frozen=True)
class _AlphaPoint:
    eps: float
    alpha: float


_STOP_CODES = {"target": 0, "alpha-floor": 2, "step-floor": 2, "n-max": 2}


def _reason_code(reason: str) -> int:
    return _STOP_CODES.get(reason, 1)


# ---------------------------------------------------------------------------
# commands


def _path_rows(records):
    for r in records:
        yield (r.eps, r.a, r.mu, r.n, r.err, r.alpha, r.b_a, r.b_mu,
               r.iters, r.wall_ms)


PATH_HEADER = ("eps", "a", "mu", "N", "err", "alpha", "b_a", "b_mu",
               "iters", "wall_ms")


def cmd_continue_nontwist(cfg: RunConfig, out_dir: str) -> int:
    problem = build_problem(cfg)
    policy = build_policy(cfg)
    start = QpState.flat_start(cfg.n_min, problem.omega, problem.b_a0)
    result = continue_in_eps(problem, start, cfg.eps_target, policy)
    write_csv(os.path.join(out_dir, "path.csv"), PATH_HEADER,
              _path_rows(result.records))
    if result.state is not None:
        th, kx, ky, nx, ny = frame_fields(problem, result.state)
        write_csv(
            os.path.join(out_dir, "final_circle.csv"),
            ("theta", "Kx", "Ky", "Nx", "Ny"),
            zip(th, kx, ky, nx, ny),
        )
    print(f"stopped: {result.reason} at eps={result.state.eps:.6g} "
          f"(N={result.state.k.n}, {len(result.records)} points)")
    return _reason_code(result.reason)


def cmd_breakdown(cfg: RunConfig, out_dir: str) -> int:
    if cfg.alpha_input:
        records = read_alpha_csv(cfg.alpha_input)
        reason = "input"
    else:
        problem = build_problem(cfg)
        policy = build_policy(cfg)
        start = QpState.flat_start(cfg.n_min, problem.omega, problem.b_a0)
        result = continue_in_eps(problem, start, cfg.eps_target, policy)
        records = result.records
        reason = result.reason
    fit = breakdown_extrapolate(records, cfg.fit_window)
    write_csv(os.path.join(out_dir, "alpha.csv"), ("eps", "alpha"),
              ((r.eps, r.alpha) for r in records))
    with open(os.path.join(out_dir, "fit.txt"), "w", encoding="ascii") as fh:
        fh.write(f"eps_c = {_fmt(fit.eps_c)}\n")
        fh.write(f"slope = {_fmt(fit.slope)}\n")
        fh.write(f"residual = {_fmt(fit.residual)}\n")
    flag = "" if fit.reliable else " (low confidence: angle not linear yet)"
    print(f"stopped: {reason}; eps_c = {fit.eps_c:.6f}{flag}")
    return 0


def cmd_rotnum_sweep(cfg: RunConfig, out_dir: str) -> int:
    problem = build_problem(cfg)
    policy = build_policy(cfg)
    start = QpState.flat_start(cfg.n_min, problem.omega, problem.b_a0)
    result = continue_in_eps(problem, start, cfg.eps_target, policy)
    if result.reason != "target":
        print(f"stopped: {result.reason} before eps_target; no sweep")
        return _reason_code(result.reason)
    state = result.state
    base = state.k.resample(cfg.sweep_grid)
    circle = GridCircle(base.eta_x.values, base.k_y.values, cfg.sweep_order)
    f0 = InternalMap.rotation(cfg.sweep_grid, problem.omega, cfg.sweep_order)
    par = ParamPoint(state.a, state.mu, state.eps)
    records = sweep_parameter(
        circle, f0, problem.family, par, cfg.sweep_which,
        cfg.sweep_halfwidth, cfg.sweep_step,
        tol=cfg.sweep_tol, max_newton=cfg.max_newton, rho_tol=cfg.rho_tol,
        lock_tol=cfg.lock_tol, q_max=cfg.q_max,
        refine_width=cfg.refine_width,
    )
    write_csv(
        os.path.join(out_dir, "rho_vs_param.csv"),
        ("param", "rho", "err", "locked_flag"),
        ((r.param, r.rho, r.rho_err, r.locked) for r in records),
    )
    locked = sum(1 for r in records if r.locked)
    print(f"swept {cfg.sweep_which}: {len(records)} points, {locked} locked")
    return 0


def cmd_twist_surface(cfg: RunConfig, out_dir: str) -> int:
    problem = build_problem(cfg)
    policy = build_policy(cfg)
    paths = twist_surface(problem, cfg.b_a0_list, cfg.eps_target, policy,
                          threads=cfg.threads)
    rows = []
    worst = 0
    for path in paths:
        for r in path.result.records:
            rows.append((path.b_a0, r.eps, r.a, r.mu))
        worst = max(worst, _reason_code(path.result.reason))
    write_csv(os.path.join(out_dir, "surface.csv"),
              ("b_a0", "eps", "a", "mu"), rows)
    print(f"{len(paths)} branches, {len(rows)} points")
    return worst


# ---------------------------------------------------------------------------
# verification battery


def _run_checks(cfg: RunConfig):
    """Yield (name, passed, detail) without stopping at failures."""
    rng = np.random.default_rng(cfg.seed)
    problem = build_problem(cfg)
    om = problem.omega
    sig = cfg.sigma

    # cohomological solvers against their defining identities
    n = 256
    u = fourier.PeriodicScalar(rng.standard_normal(n))
    xi = fourier.solve_contractive(u, sig, om)
    res = (sig * xi - fourier.shift(xi, om) - u).sup() / max(u.sup(), 1.0)
    yield "cohomological (contractive) residual", res <= 1e-10, f"{res:.2e}"

    xi2, mean = fourier.solve_small_divisor(u, om)
    res2 = (xi2 - fourier.shift(xi2, om) - (u - mean)).sup() / max(u.sup(), 1.0)
    yield "cohomological (small-divisor) residual", res2 <= 1e-10, f"{res2:.2e}"

    # integrable closed forms
    worst = 0.0
    for b in (0.0, 0.2, -0.2):
        prob_b = replace(problem, b_a0=b)
        st = newton_solve(
            prob_b, QpState.flat_start(cfg.n_min, om, b))
        worst = max(
            worst,
            abs(st.a - b / 2.0),
            abs(st.mu - (om - st.a ** 2)),
            st.k.eta_x.sup(),
            st.k.k_y.sup(),
            abs(st.diagnostics.twist_mu - 1.0),
            abs(st.diagnostics.twist_a - b),
        )
    yield "integrable closed form (a, mu, K, twists)", worst <= 1e-10, f"{worst:.2e}"

    # a mildly forced circle for frame and convergence checks
    res_c = continue_in_eps(
        problem,
        QpState.flat_start(cfg.n_min, om, problem.b_a0),
        min(cfg.eps_target, 0.5),
        build_policy(cfg),
    )
    st = res_c.state
    ok = res_c.reason == "target"
    yield "continuation to the check point", ok, f"reason={res_c.reason}"

    if ok:
        _, _, _, nx, ny = frame_fields(problem, st)
        l = tangent(st.k)
        det = l[0].values * ny - l[1].values * nx    # det [L N] = N^T Omega L
        derr = float(np.max(np.abs(det - 1.0)))
        yield "frame identity N^T Omega L = 1 (det P = 1)", derr <= 1e-10, f"{derr:.2e}"

        red = st.diagnostics.reducibility_error
        yield "frame reducibility defect", red <= 1e-7, f"{red:.2e}"

        phase = abs(fourier.average(st.k.eta_x))
        yield "phase normalization <eta_x> = 0", phase <= max(cfg.tol_phase, 1e-10), f"{phase:.2e}"

        twist = abs(st.diagnostics.twist_a - problem.b_a0)
        yield "prescribed twist level met", twist <= max(cfg.tol_twist, 1e-9), f"{twist:.2e}"

        if cfg.variant == Forcing.SYMMETRIC:
            dev = _symmetry_deviation(st)
            yield "circle symmetry K = S K(.+1/2)", dev <= 1e-8, f"{dev:.2e}"

        # quadratic decay of the Newton residual from a rough start
        bump = fourier.PeriodicScalar(
            1e-2 * np.cos(2.0 * np.pi * fourier.grid(st.k.n)))
        rough = replace(st, k=TorusEmbedding(st.k.eta_x + bump,
                                             st.k.k_y - bump),
                        diagnostics=None)
        sol = newton_solve(problem, rough)
        hist = [h for h in sol.history if h > 0.0]
        decades = [h for h in hist if h > 100.0 * cfg.tol]
        if len(decades) >= 3:
            e0, e1, e2 = decades[-3], decades[-2], decades[-1]
            q = np.log(e2 / e1) / np.log(e1 / e0)
            yield "Newton quadratic decay (exponent >= 1.7)", q >= 1.7, f"q={q:.2f}"
        else:
            # tolerance too loose to resolve the decay curve
            yield ("Newton quadratic decay (reduced confidence: "
                   "tolerance leaves < 3 usable residuals)"), True, \
                  f"history={len(hist)} points"

    # map family self-checks
    fam = problem.family
    x = rng.uniform(size=64)
    y = rng.uniform(-0.2, 0.8, size=64)
    p = ParamPoint(0.01, 0.6, 0.7)
    jac = fam.jacobian(x, y, p)
    dets = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    derr2 = float(np.max(np.abs(dets - sig)))
    yield "Jacobian determinant equals sigma", derr2 <= 1e-12, f"{derr2:.2e}"

    sym = check_symmetry(fam, p)
    if cfg.variant == Forcing.SYMMETRIC:
        yield "family symmetry S F_a S = F_{-a}", sym <= 1e-12, f"{sym:.2e}"
    else:
        yield "family is genuinely nonsymmetric", sym > 1e-3, f"{sym:.2e}"


def _symmetry_deviation(state: QpState) -> float:
    """sup distance between K(theta) and S K(theta + 1/2).

    With S(x, y) = (x - 1/2, -y) the x-shifts cancel: the condition is
    eta_x half-periodic and K_y half-antiperiodic.
    """
    half = 0.5
    dx = (state.k.eta_x - fourier.shift(state.k.eta_x, half)).values
    dx = dx - np.round(dx)                           # compare x mod 1
    dy = (state.k.k_y + fourier.shift(state.k.k_y, half)).sup()
    return max(float(np.max(np.abs(dx))), dy)


def cmd_verify(cfg: RunConfig, out_dir: str) -> int:
    del out_dir                       # report goes to stdout
    failures = 0
    for name, passed, detail in _run_checks(cfg):
        tag = "PASS" if passed else "FAIL"
        print(f"{tag}  {name}: {detail}")
        if not passed:
            failures += 1
    print(f"{'OK' if failures == 0 else 'FAILED'} "
          f"({failures} failing check{'s' if failures != 1 else ''})")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "continue-nontwist": cmd_continue_nontwist,
    "breakdown": cmd_breakdown,
    "rotnum-sweep": cmd_rotnum_sweep,
    "twist-surface": cmd_twist_surface,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ntcircle",
        description="Invariant-circle continuation and breakdown analysis.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="key=value config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for independent branches")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ValueError("threads must be at least 1")
            cfg.threads = args.threads
        # precedence: --out flag, then environment, then config
        out_dir = args.out or os.environ.get(ENV_OUT_DIR) or cfg.out_dir
        os.makedirs(out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg, out_dir)
    except (NtCircleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
