"""Command-line interface: ``llbtoc <subcommand> --config run.json --out DIR``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .adjoint import duality_residual
from .config import RunConfig
from .errors import LLBError, TargetUnreachableError
from .fields import inner_U, norm_U
from .forward import energy_diagnostics, locate_hit
from .optimizer import check_optimality, optimize
from .validation.taylor import EXPECTED, taylor_sweep

log = logging.getLogger("llbtoc")

COMMANDS = ("simulate", "hit-time", "adjoint", "grad-check", "taylor", "optimize", "verify")


def _dump(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")
    return path


def _plain(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _strided(traj, stride):
    idx = list(range(0, len(traj.frames), max(1, stride)))
    if idx[-1] != len(traj.frames) - 1:
        idx.append(len(traj.frames) - 1)
    return traj.times[idx], traj.frames[idx]


def cmd_simulate(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    traj = prob.simulate(cfg.control())
    s = cfg.data["solver"]
    threshold = s["smallness_threshold"]
    rep = energy_diagnostics(traj, prob.metric, s["smallness_constant"],
                             np.inf if threshold is None else threshold)
    stride = int(cfg.data["output"]["stride"])
    t, f = _strided(traj, stride)
    outputs = [out / "state.llbf", out / "timeseries.csv", out / "diagnostics.json"]
    io.write_snapshot(outputs[0], traj.grid, f, t, "state")
    io.write_timeseries(outputs[1], traj, prob.target.m_target, stride)
    try:
        hit = locate_hit(traj, prob.target, prob.hit_method)
        T = None if hit is None else hit.time
    except LLBError as exc:
        T = None
        log.warning("%s", exc)
    _dump(outputs[2], {"energy": asdict(rep), "T_star": T, "steps": traj.n_steps})
    return 0, outputs


def cmd_hit_time(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    traj = prob.simulate(cfg.control())
    hit = locate_hit(traj, prob.target, prob.hit_method)
    path = out / "hit_time.json"
    if hit is None:
        _dump(path, {"T_star": None, "horizon": prob.horizon})
        raise TargetUnreachableError(f"no hit before t = {prob.horizon}")
    r = hit.value(traj.frames) - prob.target.m_target
    dist = math.sqrt(traj.grid.cell_volume * float(np.sum(r * r)))
    _dump(path, {"T_star": hit.time, "method": hit.method, "distance_at_T": dist,
                 "delta": prob.target.delta, "horizon": prob.horizon})
    log.info("T* = %.10g", hit.time)
    return 0, [path]


def cmd_adjoint(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    u = cfg.control()
    ev = prob.evaluate(u, with_adjoint=True)
    adj = ev.adjoint
    rows = []
    for h in cfg.directions(u, prob.metric, seed):
        z = prob.linearize(ev, h)
        y_phi = prob.Y(ev, h) - inner_U(u, h, prob.metric)
        TD = ev.T * prob.D(ev, z)
        rows.append({
            "duality_residual": duality_residual(z.frames, adj, ev.traj, z.h_steps),
            "T_D": TD,
            "phi_pairing": y_phi,
            "bridge_residual": abs(TD - y_phi) / max(abs(TD), abs(y_phi), 1e-300),
        })
    outputs = [out / "adjoint.llbf", out / "adjoint.json"]
    io.write_snapshot(outputs[0], ev.traj.grid, adj.frames, adj.times, "adjoint")
    _dump(outputs[1], {"T_tilde": ev.T, "multiplier": adj.multiplier, "mode": adj.mode,
                       "transversality": asdict(ev.check), "directions": rows})
    return 0, outputs


def cmd_grad_check(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    u = cfg.control()
    ev = prob.evaluate(u, with_adjoint=True)
    g = prob.gradient(ev)
    gn = norm_U(g, prob.metric)
    riesz = []
    for h in cfg.directions(u, prob.metric, seed):
        riesz.append(abs(inner_U(g, h, prob.metric) - prob.Y(ev, h)) / max(gn * norm_U(h, prob.metric), 1e-300))
    h = cfg.directions(u, prob.metric, seed, n=1)[0]
    rep = taylor_sweep(prob, "gradient", u, h, cfg.data["diagnostics"]["rhos"])
    outputs = [out / "grad_check.csv", out / "grad_check.json"]
    rep.write_csv(outputs[0])
    _dump(outputs[1], {"gradient_norm": gn, "riesz_residuals": riesz, "sweep": asdict(rep)})
    return (0 if rep.passed else 1), outputs


def cmd_taylor(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    u = cfg.control()
    h = cfg.directions(u, prob.metric, seed, n=1)[0]
    summary, outputs = {}, []
    for kind in EXPECTED:
        rep = taylor_sweep(prob, kind, u, h, cfg.data["diagnostics"]["rhos"])
        p = out / f"taylor_{kind}.csv"
        rep.write_csv(p)
        outputs.append(p)
        summary[kind] = asdict(rep)
        log.info("%-8s slope %.3f (expected %.0f) %s", kind, rep.slope, rep.expected,
                 "pass" if rep.passed else "FAIL")
    outputs.append(_dump(out / "taylor.json", summary))
    return (0 if all(s["passed"] for s in summary.values()) else 1), outputs


def cmd_optimize(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    res = optimize(prob, cfg.control(), cfg.optimize_config(seed))
    outputs = [out / "iterations.csv", out / "control.llbf", out / "result.json"]
    res.write_log(outputs[0])
    io.write_snapshot(outputs[1], res.u.grid, res.u.frames, res.u.times, "control")
    _dump(outputs[2], {
        "converged": res.converged, "message": res.message, "T": res.T,
        "J_history": res.J_history, "grad_history": res.grad_history,
        "multiplier": res.multiplier, "violation_history": res.violation_history,
        "report": None if res.report is None else json.loads(res.report.to_json()),
    })
    return (0 if res.converged else 6), outputs


def cmd_verify(cfg: RunConfig, out: Path, seed: int) -> tuple[int, list]:
    prob = cfg.problem()
    rep = check_optimality(prob, cfg.control(), cfg.optimize_config(seed))
    path = out / "report.json"
    path.write_text(rep.to_json() + "\n")
    ok = rep.verdict.get("optimal", False)
    if not ok:
        log.error("verification failed: %s", {k: v for k, v in rep.verdict.items() if not v})
    return (0 if ok else LLBError.exit_code), [path]


HANDLERS = {
    "simulate": cmd_simulate,
    "hit-time": cmd_hit_time,
    "adjoint": cmd_adjoint,
    "grad-check": cmd_grad_check,
    "taylor": cmd_taylor,
    "optimize": cmd_optimize,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="llbtoc", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="seed for probe and test directions")
    ap.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        code, outputs = HANDLERS[args.command](cfg, out, args.seed)
        io.write_manifest(out, args.command, cfg.data, [Path(args.config), *cfg.input_files()],
                          outputs, args.seed)
        return code
    except LLBError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
