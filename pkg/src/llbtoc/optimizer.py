"""Outer optimization over the control (and, in penalty mode, the final time).

Reduced mode minimises J(u) = 1/2 T*(u)^2 + 1/2 ||u||_U^2 by projected
steepest descent in the U metric with Barzilai-Borwein trial steps and
Armijo backtracking. Penalty mode treats T as a free variable and minimises
the augmented Lagrangian

    1/2 T^2 + 1/2 ||u||_U^2 + lam c + mu/2 c^2,   c = ||m(T) - m_target||^2 - delta^2,

with the classical update lam <- lam + mu c between inner solves.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adjoint import seeded_adjoint
from .errors import ConfigError, ConvergenceError, TargetUnreachableError, TransversalityError
from .fields import ControlTrajectory, SobolevMetric, inner_U, l2, norm_U
from .forward import locate_hit, stencil_hit
from .objective import HittingProblem, OptimalityReport, con1, riesz_from_weights

log = logging.getLogger(__name__)

LOG_COLUMNS = ("iter", "J", "time_term", "control_term", "grad_norm", "T", "constraint_violation")


@dataclass
class OptimizeConfig:
    mode: str = "reduced"
    max_iters: int = 200
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    grad_tol: float = 1e-6
    stall_tol: float = 1e-14
    uad: str = "whole-space"
    radius: float = 1.0
    # penalty mode
    mu0: float = 10.0
    mu_factor: float = 10.0
    mu_max: float = 1e8
    lam0: float = 0.0
    max_outer: int = 20
    feas_tol: float = 1e-6
    # diagnostics
    rho_sweep: tuple = (1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3)
    n_probes: int = 6
    probe_seed: int = 0
    y_tol: float = 1e-8

    def __post_init__(self):
        if self.mode not in ("reduced", "penalty"):
            raise ConfigError(f"unknown optimizer mode {self.mode!r}")
        if self.uad not in ("whole-space", "ball"):
            raise ConfigError(f"unknown admissible set {self.uad!r}")
        if not 0.0 < self.c1 < 1.0:
            raise ConfigError("Armijo constant c1 must lie in (0, 1)")
        if not 0.0 < self.backtrack < 1.0:
            raise ConfigError("backtrack factor must lie in (0, 1)")
        if self.uad == "ball" and not self.radius > 0:
            raise ConfigError("ball radius must be positive")
        for name in ("grad_tol", "stall_tol", "feas_tol", "y_tol", "mu0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.mu_factor < 1.0:
            raise ConfigError("mu_factor must be >= 1")


@dataclass
class OptimizeResult:
    u: ControlTrajectory
    T: float
    J_history: list[float]
    grad_history: list[float]
    converged: bool
    message: str
    rows: list[dict] = field(default_factory=list)
    report: OptimalityReport | None = None
    multiplier: float = float("nan")
    mu: float = float("nan")
    violation_history: list[float] = field(default_factory=list)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=LOG_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (repr(float(v)) if k != "iter" else int(v)) for k, v in row.items()})
        return buf.getvalue()

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.log_csv())


def project_Uad(u: ControlTrajectory, config: OptimizeConfig, metric: SobolevMetric) -> ControlTrajectory:
    """Metric projection onto the admissible set."""
    if config.uad == "whole-space":
        return u
    nrm = norm_U(u, metric)
    if nrm <= config.radius:
        return u
    return u * (config.radius / nrm)


# -- a point of the search space: the control, plus T in penalty mode ---------


@dataclass
class _Point:
    u: ControlTrajectory
    T: float = float("nan")

    def axpy(self, a: float, d: "_Point") -> "_Point":
        T = self.T + a * d.T if not math.isnan(self.T) else self.T
        return _Point(self.u + a * d.u, T)

    def minus(self, other: "_Point") -> "_Point":
        T = self.T - other.T if not math.isnan(self.T) else self.T
        return _Point(self.u - other.u, T)


def _dot(a: _Point, b: _Point, metric) -> float:
    out = inner_U(a.u, b.u, metric)
    if not math.isnan(a.T):
        out += a.T * b.T
    return out


@dataclass
class _Value:
    J: float
    time_term: float
    control_term: float
    T: float
    violation: float
    grad: _Point | None = None


def _reduced_value(problem: HittingProblem, x: _Point, with_grad: bool) -> _Value:
    ev = problem.evaluate(x.u, with_adjoint=with_grad)
    dist = math.sqrt(max(l2(problem.grid, ev.residual, ev.residual), 0.0))
    val = _Value(ev.cost.total, ev.cost.time_term, ev.cost.control_term, ev.T,
                 abs(dist - problem.target.delta))
    if with_grad:
        val.grad = _Point(problem.gradient(ev))
    return val


def _penalty_value(problem: HittingProblem, x: _Point, lam: float, mu: float, with_grad: bool) -> _Value:
    traj = problem.simulate(x.u)
    hit = stencil_hit(traj.times, x.T, "cubic")
    r = hit.value(traj.frames) - problem.target.m_target
    d2 = l2(problem.grid, r, r)
    c = d2 - problem.target.delta**2
    ctrl = 0.5 * norm_U(x.u, problem.metric) ** 2
    time_term = 0.5 * x.T**2
    J = time_term + ctrl + lam * c + 0.5 * mu * c * c
    val = _Value(J, time_term, ctrl, x.T, abs(math.sqrt(d2) - problem.target.delta))
    if with_grad:
        dc = lam + mu * c
        m_t = hit.value(traj.frames, 1)
        seeds = [dc * 2.0 * wj * r for wj in hit.weights[0]]
        _, weights = seeded_adjoint(traj, hit.stencil, seeds, problem.metric)
        gu = riesz_from_weights(weights, traj, x.u, problem.metric)
        gT = x.T + dc * 2.0 * l2(problem.grid, r, m_t)
        val.grad = _Point(gu, gT)
    return val


def _project(x: _Point, config: OptimizeConfig, metric, horizon: float) -> _Point:
    u = project_Uad(x.u, config, metric)
    T = x.T
    if not math.isnan(T):
        T = float(np.clip(T, 1e-12, horizon))
    return _Point(u, T)


def _descent(fun, x0: _Point, config: OptimizeConfig, metric, horizon, max_iters, tol, rows, it0=0):
    """Projected gradient descent with BB trial steps and Armijo backtracking.

    ``fun(x, with_grad)`` returns a _Value or raises TargetUnreachableError,
    in which case the trial step is rejected.
    """
    x = x0
    cur = fun(x, True)
    J_hist, g_hist = [cur.J], []
    alpha = 1.0
    prev = None
    it = it0
    converged = False
    message = "iteration cap reached"
    for k in range(max_iters + 1):
        g = cur.grad
        # stationarity measure: projected-gradient residual (= ||g|| without constraints)
        res_pt = x.minus(_project(x.axpy(-1.0, g), config, metric, horizon))
        res = math.sqrt(max(_dot(res_pt, res_pt, metric), 0.0))
        g_hist.append(res)
        rows.append({"iter": it, "J": cur.J, "time_term": cur.time_term,
                     "control_term": cur.control_term, "grad_norm": res, "T": cur.T,
                     "constraint_violation": cur.violation})
        log.debug("iter %d J=%.15g |g|=%.3e T=%.10g", it, cur.J, res, cur.T)
        if res <= tol:
            converged, message = True, "gradient tolerance reached"
            break
        if k == max_iters:
            break
        if prev is not None:
            s = x.minus(prev[0])
            y = _Point(g.u - prev[1].u, g.T - prev[1].T if not math.isnan(g.T) else g.T)
            sy = _dot(s, y, metric)
            if sy > 0:
                alpha = _dot(s, s, metric) / sy
        step = alpha
        accepted = None
        for _ in range(config.max_backtracks):
            trial = _project(x.axpy(-step, g), config, metric, horizon)
            try:
                val = fun(trial, False)
            except TargetUnreachableError:
                step *= config.backtrack
                continue
            decrease = _dot(g, trial.minus(x), metric)
            if val.J <= cur.J + config.c1 * decrease + config.stall_tol:
                accepted = trial
                break
            step *= config.backtrack
        if accepted is None:
            raise ConvergenceError(
                f"line search failed after {config.max_backtracks} backtracks at iteration {it}"
            )
        prev = (x, g)
        x = accepted
        cur = fun(x, True)
        J_hist.append(cur.J)
        alpha = step
        it += 1
    return x, cur, J_hist, g_hist, converged, message, it


def optimize(problem: HittingProblem, u_init: ControlTrajectory, config: OptimizeConfig | None = None,
             check: bool = True) -> OptimizeResult:
    """Run the outer loop; returns the last iterate and, if ``check``, its report."""
    config = config or OptimizeConfig()
    horizon = problem.horizon
    u0 = project_Uad(u_init, config, problem.metric)
    hit0 = locate_hit(problem.simulate(u0), problem.target, problem.hit_method)
    rows: list[dict] = []

    if config.mode == "reduced":
        if hit0 is None:
            raise TargetUnreachableError("initial control misses the delta-tube")
        x, cur, J_hist, g_hist, ok, msg, _ = _descent(
            lambda p, wg: _reduced_value(problem, p, wg), _Point(u0), config,
            problem.metric, horizon, config.max_iters, config.grad_tol, rows,
        )
        res = OptimizeResult(x.u, cur.T, J_hist, g_hist, ok, msg, rows)
    else:
        T0 = hit0.time if hit0 is not None else 0.5 * horizon
        x = _Point(u0, T0)
        lam, mu = config.lam0, config.mu0
        J_hist, g_hist, viol = [], [], []
        it = 0
        ok = False
        msg = "outer iteration cap reached"
        for _ in range(config.max_outer):
            x, cur, jh, gh, inner_ok, _, it = _descent(
                lambda p, wg: _penalty_value(problem, p, lam, mu, wg), x, config,
                problem.metric, horizon, config.max_iters, config.grad_tol, rows, it,
            )
            J_hist += jh
            g_hist += gh
            traj = problem.simulate(x.u)
            hit = stencil_hit(traj.times, x.T, "cubic")
            r = hit.value(traj.frames) - problem.target.m_target
            c = l2(problem.grid, r, r) - problem.target.delta**2
            viol.append(cur.violation)
            log.info("outer: lam=%.6g mu=%.3g c=%.3e T=%.10g", lam, mu, c, x.T)
            if inner_ok and cur.violation <= config.feas_tol:
                ok, msg = True, "gradient and feasibility tolerances reached"
                break
            lam += mu * c
            mu = min(mu * config.mu_factor, config.mu_max)
            it += 1
        res = OptimizeResult(x.u, x.T, J_hist, g_hist, ok, msg, rows, None, lam, mu, viol)

    if check:
        try:
            res.report = check_optimality(problem, res.u, config)
        except (TargetUnreachableError, TransversalityError) as exc:
            log.warning("optimality check skipped: %s", exc)
    return res


# -- optimality check ----------------------------------------------------------


def cosine_probes(u: ControlTrajectory, n: int, seed: int, metric: SobolevMetric, modes: int = 3):
    """Fixed-seed smooth probes: low-order cosine series in time and space, unit U-norm."""
    rng = np.random.default_rng(seed)
    grid = u.grid
    T = u.horizon
    t = u.times
    xs = grid.mesh()
    out = []
    for _ in range(n):
        frames = np.zeros((len(t),) + grid.shape)
        for a in range(modes):
            ct = np.cos(a * math.pi * t / T)
            for b in np.ndindex(*([modes] * grid.dim)):
                cx = np.ones(grid.cells)
                for ax, j in enumerate(b):
                    cx = cx * np.cos(j * math.pi * xs[ax] / grid.extent[ax])
                coef = rng.standard_normal(3) / (1.0 + a + sum(b))
                frames += ct.reshape((-1,) + (1,) * grid.dim + (1,)) * cx[None, ..., None] * coef
        h = u.like(frames)
        out.append(h * (1.0 / norm_U(h, metric)))
    return out


def _tangent(h: ControlTrajectory, u: ControlTrajectory, config: OptimizeConfig, metric) -> ControlTrajectory:
    """Project a probe into the tangent cone of the admissible set at u."""
    if config.uad == "whole-space":
        return h
    nu = norm_U(u, metric)
    if nu < config.radius * (1.0 - 1e-9):
        return h
    a = inner_U(u, h, metric)
    return h if a <= 0 else h - u * (a / nu**2)


def check_optimality(problem: HittingProblem, u: ControlTrajectory, config: OptimizeConfig | None = None,
                     probes: list[ControlTrajectory] | None = None) -> OptimalityReport:
    """First- and second-order checks on sampled cone directions.

    Feasible probes: the fixed cosine probes and their negatives (projected to
    the tangent cone) plus the projected steepest-descent direction. Critical
    probes: the cosine probes made Y-orthogonal by one Gram-Schmidt step
    against the Riesz gradient.
    """
    config = config or OptimizeConfig()
    metric = problem.metric
    ev = problem.evaluate(u)
    rep = OptimalityReport(float("nan"), ev.T, problem.horizon, y_tolerance=config.y_tol)
    rep.con1 = con1(ev.T, problem.horizon * (1.0 - 1e-12))
    try:
        problem.attach_adjoint(ev)
    except TransversalityError as exc:
        rep.transversality = {"passed": False, "message": str(exc)}
        rep.verdict = {"first_order": False, "second_order": False, "transversality": False,
                       "con1": rep.con1, "optimal": False}
        return rep
    ck = ev.check
    rep.transversality = {"numerator": ck.numerator, "denominator": ck.denominator,
                          "threshold": ck.threshold, "passed": ck.passed}
    g = problem.gradient(ev)
    gn = norm_U(g, metric)
    rep.gradient_norm = gn
    base = probes if probes is not None else cosine_probes(u, config.n_probes, config.probe_seed, metric)

    feasible = []
    for i, h in enumerate(base):
        feasible.append((f"cos{i}+", _tangent(h, u, config, metric)))
        feasible.append((f"cos{i}-", _tangent(-h, u, config, metric)))
    if gn > 0:
        feasible.append(("descent", _tangent(g * (-1.0 / gn), u, config, metric)))
    first_ok = True
    for name, h in feasible:
        y = problem.Y(ev, h)
        rep.Y_values.append(y)
        first_ok &= y >= -config.y_tol
        rep.probes.append({"name": name, "kind": "feasible", "Y": y})

    second_ok = True
    for i, h in enumerate(base):
        hc = _tangent(h, u, config, metric)
        if gn > 0:
            hc = hc - g * (inner_U(g, hc, metric) / gn**2)
        q = problem.Q(ev, hc)
        second_ok &= math.isfinite(q["Q"]) and q["Q"] > 0
        rep.probes.append({"name": f"crit{i}", "kind": "critical", "Y": problem.Y(ev, hc), **q})

    rep.verdict = {
        "first_order": bool(first_ok),
        "second_order": bool(second_ok),
        "transversality": bool(ck.passed),
        "con1": bool(rep.con1),
        "optimal": bool(first_ok and second_ok and ck.passed and rep.con1),
    }
    return rep
