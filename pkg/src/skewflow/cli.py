"""Batch entry point: ``skewflow <command> CONFIG [--output PATH] [--threads N]``.

Exit codes: 0 success/pass, 1 validation failure, 2 usage or config error,
3 I/O error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, RunConfig, as_float_list, parse_config, profile
from .pde_solver import PDEError, TransmissionPDE, evaluate_u, solve
from .simulator import SimConfig, SimulationError, set_default_threads, simulate
from .transform import RemovalTransform, TransformedProblem, TransformError, straighten
from .validation import (CurveFunction, SXFunction, ValidationError, chapman_kolmogorov_test,
                         compare_fk, ito_peskir_residual, martingale_defect)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

COMMANDS = ("simulate", "solve-pde", "validate-fk", "validate-ck", "validate-ip",
            "validate-gen", "transform-dump")


def _g(x) -> str:
    return f"{float(x):.17g}"


def _out(sec: dict, override, default=None):
    return override or sec.get("output") or default


def cmd_simulate(cfg: RunConfig, output):
    sec = cfg.section("simulate")
    sim = SimConfig(int(sec.get("n_paths", 1000)), int(sec.get("n_steps", 1000)), cfg.seed,
                    (float(sec.get("start_time", 0.0)), sec.get("start_x")),
                    record_every=sec.get("record_every", 1))
    ens = simulate(cfg.problem, sim)
    path = _out(sec, output)
    if path:
        if sec.get("format", "csv") == "binary":
            ens.to_binary(path)
        else:
            ens.to_csv(path)
    xT = ens.terminal
    print(f"paths {ens.n_paths} steps {sim.n_steps} seed {cfg.seed}")
    print(f"mean_X_T {_g(xT.mean())}")
    for i, xi in enumerate(np.atleast_1d(cfg.problem.family.positions(cfg.problem.T)), 1):
        print(f"P(X_T > x_{i}(T)) {_g(np.mean(xT > xi))}")
    print(f"aborted_paths {int(ens.failed.sum())}")
    return EXIT_OK


def _pde_from(cfg: RunConfig, sec: dict):
    pde = TransmissionPDE(cfg.problem, float(sec.get("lambda", 0.0)), profile(sec.get("f")),
                          profile(sec.get("g")))
    grid = {"L": float(sec.get("L", 10.0)), "N": int(sec.get("N", 800)),
            "M": int(sec.get("M", 800)), "theta": float(sec.get("theta", 0.5))}
    return pde, grid


def cmd_solve_pde(cfg: RunConfig, output):
    sec = cfg.section("pde")
    pde, grid = _pde_from(cfg, sec)
    sol = solve(pde, **grid)
    path = _out(sec, output)
    if path:
        sol.to_csv(path)
    if sec.get("grid_dump"):
        sol.to_grid_dump(sec["grid_dump"])
    print(f"cells {sol.N} levels {sol.M} h {_g(sol.h)} box [{_g(sol.lo)}, {_g(sol.hi)}]")
    print(f"max_flux_mismatch {_g(sol.flux_mismatch().max(initial=0.0))}")
    for x in as_float_list(sec.get("points", []), "pde.points"):
        print(f"u(0, {_g(x)}) {_g(evaluate_u(sol, 0.0, x))}")
    return EXIT_OK


def cmd_validate_fk(cfg: RunConfig, output):
    sec = cfg.section("validate_fk")
    pde, grid = _pde_from(cfg, sec)
    pts = sec.get("points") or [[0.0, x] for x in (-1, -0.5, -0.25, -0.1, 0, 0.1, 0.25, 0.5, 1)]
    mc = {"n_paths": int(sec.get("n_paths", 200_000)), "n_steps": int(sec.get("n_steps", 800)),
          "seed": cfg.seed}
    rep = compare_fk(cfg.problem, pde.lam, pde.f, pde.g, [tuple(map(float, p)) for p in pts],
                     mc, grid, C=float(sec.get("C", 5.0)))
    path = _out(sec, output, "fk_report.csv")
    rep.to_csv(path)
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_validate_ck(cfg: RunConfig, output):
    sec = cfg.section("validate_ck")
    rep = chapman_kolmogorov_test(
        cfg.problem, float(sec.get("s", 0.0)), float(sec.get("u", cfg.problem.T / 2)),
        float(sec.get("t", cfg.problem.T)), profile(sec.get("phi", {"kind": "step", "params": [0.0, 1.0]})),
        int(sec.get("n_paths", 200_000)), int(sec.get("n_steps", 1000)), cfg.seed,
        node_spacing=float(sec.get("node_spacing", 0.1)),
        inner_paths=int(sec.get("inner_paths", 10_000)))
    lines = [f"direct {_g(rep.direct)} se {_g(rep.direct_se)}",
             f"two_stage {_g(rep.two_stage)} se {_g(rep.two_stage_se)}",
             f"defect {_g(rep.defect)} tol {_g(3 * rep.combined_se)} {'PASS' if rep.passed else 'FAIL'}"]
    _emit(lines, _out(sec, output))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_validate_ip(cfg: RunConfig, output):
    sec = cfg.section("validate_ip")
    fn = CurveFunction(sec.get("kind", "abs"), float(sec.get("c", 1.0)),
                       tuple(sec.get("gamma", (0.0, 0.2, 1.0))))
    rep = ito_peskir_residual(cfg.problem, fn, int(sec.get("n_paths", 100_000)),
                              int(sec.get("n_steps", 2000)), cfg.seed,
                              float(sec.get("epsilon", 0.02)), bool(sec.get("richardson", False)))
    lines = [f"mean_residual {_g(rep.mean)} se {_g(rep.std_error)}",
             f"ci [{_g(rep.ci[0])}, {_g(rep.ci[1])}] half_width {_g(rep.half_width)}",
             f"mean_abs {_g(rep.mean_abs)} tol {_g(rep.tol)} {'PASS' if rep.passed else 'FAIL'}"]
    _emit(lines, _out(sec, output))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_validate_gen(cfg: RunConfig, output):
    sec = cfg.section("validate_gen")
    fn = SXFunction(cfg.problem, float(sec.get("v", 0.0)), float(sec.get("p", 1.0)),
                    float(sec.get("q", 0.0)), float(sec.get("w1", 0.0)), bool(sec.get("enforce", True)))
    starts = as_float_list(sec.get("starts", [-1.0, -0.3, 0.0, 0.3, 1.0]), "validate_gen.starts")
    times = as_float_list(sec.get("check_times", [0.5, cfg.problem.T]), "validate_gen.check_times")
    rep = martingale_defect(cfg.problem, fn, starts, times, int(sec.get("n_paths", 20_000)),
                            int(sec.get("n_steps", 1000)), cfg.seed, C=float(sec.get("C", 5.0)))
    lines = ["x,t,defect,se,tol,pass"]
    lines += [f"{_g(r['x'])},{_g(r['t'])},{_g(r['defect'])},{_g(r['se'])},{_g(r['tol'])},{int(r['pass'])}"
              for r in rep.rows]
    lines.append("PASS" if rep.passed else "FAIL")
    _emit(lines, _out(sec, output))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_transform_dump(cfg: RunConfig, output):
    sec = cfg.section("transform_dump")
    pr = cfg.problem
    ts = as_float_list(sec.get("t", [0.0, pr.T / 2, pr.T]), "transform_dump.t")
    xr = sec.get("x", {"lo": -3.0, "hi": 3.0, "n": 61})
    xs = np.linspace(xr["lo"], xr["hi"], int(xr["n"])) if isinstance(xr, dict) else np.asarray(
        as_float_list(xr, "transform_dump.x"))
    tr = RemovalTransform(pr.family, pr.beta)
    tp = TransformedProblem(tr, pr.sigma, pr.b)
    st = straighten(pr.family)
    n_if = pr.family.n_interfaces
    head = "t,x,mu,R,r,Psi,sigma_bar,b_bar," + ",".join(f"y_{i}" for i in range(1, n_if + 1))
    lines = [head]
    for t in ts:
        snap = tr.at(t)
        sb, bb, rx = tp.coefficients(t, xs)
        cols = [snap.mu(xs), snap.R(xs), rx, st.Psi(t, xs), sb, bb]
        ys = ",".join(_g(v) for v in snap.ys)
        for k, x in enumerate(xs):
            lines.append(",".join([_g(t), _g(x)] + [_g(c[k]) for c in cols]) + "," + ys)
    path = _out(sec, output)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {len(lines) - 1} rows to {path}")
    else:
        print("\n".join(lines))
    return EXIT_OK


def _emit(lines, path):
    text = "\n".join(lines)
    print(text)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


HANDLERS = {
    "simulate": cmd_simulate,
    "solve-pde": cmd_solve_pde,
    "validate-fk": cmd_validate_fk,
    "validate-ck": cmd_validate_ck,
    "validate-ip": cmd_validate_ip,
    "validate-gen": cmd_validate_gen,
    "transform-dump": cmd_transform_dump,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skewflow", description="Skew diffusions across moving interfaces.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="JSON configuration file")
    ap.add_argument("--output", "-o", help="override the section's output path")
    ap.add_argument("--threads", type=int, default=1, help="worker cap for path simulation")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    set_default_threads(args.threads)
    try:
        return HANDLERS[args.command](cfg, args.output)
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, PDEError, SimulationError, ValidationError, TransformError,
            KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
