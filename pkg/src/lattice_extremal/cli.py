"""Command-line entry point: ``lattice-extremal <subcommand> ...``.

Exit codes: 0 success, 1 invalid parameters, 2 solver non-convergence or
integrator failure (the best iterate is still written), 3 ``verify`` found a
violated inequality.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import parallel
from .cc import cc_report, escaping, perturbation, random_bump, stationary
from .hls import HLSOptions, estimate_K, young_upper_bound
from .lattice_core import (
    HLSParams,
    LatticeError,
    LatticeFunction,
    SobolevParams,
    make_box,
    write_grid,
)
from .probe import bump, run_blowup
from .sobolev import ConvergenceWarning, SolverOptions, el_residual, estimate_S, minimize_on_box, verify_sobolev

SCHEMA = "lattice-extremal/1"
EXIT_OK, EXIT_PARAMS, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 1, 2, 3

log = logging.getLogger("lattice_extremal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAMS, f"{self.prog}: error: {message}\n")


def _radii(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}") from exc


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _grid_path(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}_{tag}.grid")


def _save_grid(out: Path, tag: str, u: LatticeFunction) -> str:
    path = _grid_path(out, tag)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_grid(path, u)
    return path.name


def _finite(x: float):
    return x if math.isfinite(x) else None


def random_box_function(box, rng: np.random.Generator) -> LatticeFunction:
    """Alternates between a signed uniform field and a tapered positive bump."""
    if rng.random() < 0.5:
        return LatticeFunction(box, rng.uniform(-1.0, 1.0, box.shape))
    width = rng.uniform(0.5, 2.0) * max(box.radius, 1)
    return random_bump(box.dimension, box.radius, rng, width=width)


# ----------------------------------------------------------------------------


def _supercritical_sobolev(args, command: str) -> SobolevParams:
    try:
        params = SobolevParams(args.dim, args.p, args.q)
    except LatticeError as exc:
        raise LatticeError(f"{exc}; {command} needs the supercritical range q > p* = Np/(N-p)") from exc
    if not params.supercritical:
        raise LatticeError(f"{command} needs the supercritical range q > p* = {params.p_star:.12g}")
    return params


def cmd_sobolev_min(args) -> int:
    params = _supercritical_sobolev(args, "sobolev-min")
    opts = SolverOptions(el_tol=args.tol, max_iter=args.max_iter)
    radii = args.radii or [args.radius]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        runs = estimate_S(params, radii, opts)
    out = Path(args.out)
    rows = []
    for R, res in runs:
        row = {
            "box_radius": R,
            "constant_estimate": res.constant_estimate,
            "residual_sup": _finite(res.residual_sup),
            "iterations": res.iterations,
            "converged": res.converged,
            "extremizer": _save_grid(out, f"R{R}", res.extremizer),
        }
        if params.p > 1 and params.q > 2:
            check = el_residual(res, params)
            row["rescaled_residual_sup"] = check.rescaled_residual_sup
            row["rescaled_extremizer"] = _save_grid(out, f"R{R}_rescaled", check.rescaled)
        rows.append(row)
    last = rows[-1]
    payload = {
        "schema": SCHEMA,
        "command": "sobolev-min",
        "seed": args.seed,
        "params": {"N": params.N, "p": params.p, "q": params.q, "p_star": params.p_star},
        "tol": args.tol,
        "constant_estimate": last["constant_estimate"],
        "residual_sup": last["residual_sup"],
        "iterations": last["iterations"],
        "box_radius": last["box_radius"],
        "extremizer": last["extremizer"],
        "converged": all(r["converged"] for r in rows),
        "runs": rows,
    }
    _write_json(out, payload)
    for r in rows:
        print(f"R={r['box_radius']}  S_R={r['constant_estimate']:.15g}  residual={r['residual_sup']}  iterations={r['iterations']}")
    return EXIT_OK if payload["converged"] else EXIT_NONCONVERGED


def cmd_hls_max(args) -> int:
    params = HLSParams(args.dim, args.r, args.s, args.lam)
    if not params.supercritical and not args.allow_subcritical:
        raise LatticeError(
            f"hls-max needs 1/r + 1/s + lambda/N > 2 (got {params.exponent_sum:.12g}); "
            "pass --allow-subcritical to solve the box problem anyway"
        )
    if params.lam * params.t <= params.N:
        print("warning: lambda*t <= N, K_R may diverge as R grows", file=sys.stderr)
    opts = HLSOptions(el_tol=args.tol, method=args.conv, max_sweeps=args.max_sweeps)
    radii = args.radii or [args.radius]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        runs = estimate_K(params, radii, opts, allow_subcritical=args.allow_subcritical)
    out = Path(args.out)
    rows = []
    for R, res, pair in runs:
        rows.append(
            {
                "box_radius": R,
                "K_R": res.constant_estimate,
                "residual_sup": res.residual_sup,
                "sweeps": res.iterations,
                "converged": res.converged,
                "young_upper_bound": young_upper_bound(params, R),
                "f": _save_grid(out, f"R{R}_f", pair.f),
                "g": _save_grid(out, f"R{R}_g", pair.g),
            }
        )
    last = rows[-1]
    payload = {
        "schema": SCHEMA,
        "command": "hls-max",
        "seed": args.seed,
        "params": {
            "N": params.N, "r": params.r, "s": params.s, "t": params.t,
            "lambda": params.lam, "supercritical": params.supercritical,
        },
        "conv": args.conv,
        "K_R": last["K_R"],
        "residual_sup": last["residual_sup"],
        "box_radius": last["box_radius"],
        "f": last["f"],
        "g": last["g"],
        "converged": all(r["converged"] for r in rows),
        "runs": rows,
    }
    _write_json(out, payload)
    for r in rows:
        print(f"R={r['box_radius']}  K_R={r['K_R']:.15g}  residual={r['residual_sup']:.3g}  sweeps={r['sweeps']}")
    return EXIT_OK if payload["converged"] else EXIT_NONCONVERGED


def cmd_cc_check(args) -> int:
    params = _supercritical_sobolev(args, "cc-check")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        res = minimize_on_box(params, make_box(args.dim, args.radius))
    w = res.extremizer
    S_est = res.constant_estimate
    Rw = args.radius
    rng = np.random.default_rng(args.seed)
    u = random_bump(args.dim, Rw, rng).scaled(0.5)
    ns = list(range(1, args.terms + 1))
    if args.scenario == "stationary":
        seq = stationary(w, args.terms)
    elif args.scenario == "perturb":
        seq = perturbation(u, w, [10**k for k in range(args.terms)])
    else:
        # start far enough out that every term has disjoint gradient supports
        step = 2 * Rw + 3
        seq = escaping(u, w, ns, step=step)
    # default: just beyond the graph-distance reach of the fixed part
    rmax = args.rmax if args.rmax is not None else Rw * args.dim + 1
    report = cc_report(seq, params, S_est, rmax)
    payload = {
        "schema": SCHEMA,
        "command": "cc-check",
        "scenario": args.scenario,
        "seed": args.seed,
        "params": {"N": params.N, "p": params.p, "q": params.q},
        "extremizer_radius": Rw,
        "extremizer": _save_grid(Path(args.out), "w", w),
        **report.to_dict(),
    }
    _write_json(Path(args.out), payload)
    print(f"scenario={args.scenario}  S_est={S_est:.15g}  gaps={report.composition_gaps}  cc_margin={report.cc_inequality_margin:.3g}")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_blowup(args) -> int:
    u0 = bump(args.dim, args.radius, amplitude=args.amplitude)
    rep = run_blowup(args.dim, args.q, u0, dt=args.dt, max_steps=args.max_steps, cap=args.cap)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rep.to_csv(), encoding="utf-8")
    summary = {
        "schema": SCHEMA,
        "command": "blowup",
        "seed": args.seed,
        "params": {"N": args.dim, "q": args.q, "radius": args.radius, "amplitude": args.amplitude},
        "in_window": rep.in_window,
        "at_window_endpoint": rep.at_window_endpoint,
        "outcome": rep.outcome,
        "blew_up": rep.blew_up,
        "steps": rep.steps,
        "time": rep.time,
        "cap": args.cap,
        "failure": rep.failure,
        "trajectory": out.name,
    }
    _write_json(out.with_suffix(".json"), summary)
    print(f"{rep.outcome} after {rep.steps} steps (t={rep.time:.6g}); window 0<N(q-2)<2: {rep.in_window}")
    if rep.at_window_endpoint:
        print("q is the window endpoint (2+2N)/N: reported only", file=sys.stderr)
    return EXIT_NONCONVERGED if rep.failure else EXIT_OK


def cmd_verify(args) -> int:
    params = SobolevParams(args.dim, args.p, args.q)
    box = make_box(args.dim, args.radius)
    rng = np.random.default_rng(args.seed)
    funcs = [random_box_function(box, rng) for _ in range(args.samples)]
    margins = parallel.map_ordered(lambda u: verify_sobolev(u, params, args.s_est)[1], funcs)
    worst = min(margins)
    ok = worst >= -1e-9
    payload = {
        "schema": SCHEMA,
        "command": "verify",
        "seed": args.seed,
        "params": {"N": params.N, "p": params.p, "q": params.q},
        "S_est": args.s_est,
        "radius": args.radius,
        "samples": args.samples,
        "min_margin": worst,
        "violations": sum(m < -1e-9 for m in margins),
        "passed": ok,
    }
    _write_json(Path(args.out), payload)
    print(f"{args.samples} samples, min margin {worst:.6g}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VIOLATION


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lattice-extremal", description="Extremal functions for discrete Sobolev and HLS inequalities on Z^N.")
    parser.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${parallel.ENV_VAR} or all cores)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        # accept the global flags after the subcommand too
        p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("sobolev-min", help="minimize the Sobolev quotient on boxes")
    common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--radii", type=_radii, default=None, help="comma-separated increasing radii (overrides --radius)")
    p.add_argument("--tol", type=float, default=1e-6, help="Euler-Lagrange residual target")
    p.add_argument("--max-iter", type=int, default=200_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sobolev_min)

    p = sub.add_parser("hls-max", help="maximize the HLS functional on boxes")
    common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--radii", type=_radii, default=None)
    p.add_argument("--tol", type=float, default=1e-10, help="Euler-Lagrange residual target")
    p.add_argument("--max-sweeps", type=int, default=50_000)
    p.add_argument("--conv", choices=("direct", "fft"), default="fft")
    p.add_argument("--allow-subcritical", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hls_max)

    p = sub.add_parser("cc-check", help="Brezis-Lieb and concentration-compactness diagnostics")
    common(p)
    p.add_argument("--scenario", choices=("stationary", "escape", "perturb"), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--rmax", type=int, default=None)
    p.add_argument("--radius", type=int, default=2, help="box radius of the extremizer used as profile")
    p.add_argument("--terms", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cc_check)

    p = sub.add_parser("blowup", help="heat-flow blow-up probe")
    common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--dt", type=float, default=None, help="fixed time step (default: adaptive 0.1 / (4N + max v^(q-2)))")
    p.add_argument("--max-steps", type=int, default=1_000_000)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--cap", type=float, default=1e6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_blowup)

    p = sub.add_parser("verify", help="check the Sobolev inequality with a given constant on random functions")
    common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--s-est", type=float, required=True)
    p.add_argument("--radius", type=int, default=4)
    p.add_argument("--out", default="verify.json")
    p.set_defaults(func=cmd_verify)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    previous = parallel.configured_threads()
    parallel.set_threads(args.threads)
    try:
        return args.func(args)
    except LatticeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    finally:
        parallel.set_threads(previous)


def main() -> None:
    sys.exit(run())
