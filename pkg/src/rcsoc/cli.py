"""Command-line front end.

Commands: solve, sweep, spectrum, dynamics, classify.  Option values
resolve in the order defaults < config file (--config, JSON) <
environment (RCSOC_<NAME>) < command-line flags, so every physical
parameter has exactly one effective value.

Exit codes are a stable API: 0 success, 1 contract flag raised by the
command (e.g. drift above threshold), 2 solver did not converge,
3 dynamically unstable point, 64 usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .bogoliubov import (build_bogoliubov_matrix, excitation_spectrum,
                         stability_check)
from .dynamics import (LambdaParams, ThreeLevelField, adiabatic_residual,
                       drift_report, excited_steady_state,
                       propagate_effective, propagate_lambda)
from .errors import NotConvergedError
from .meanfield import SolverConfig, solve_steady_state
from .model import (ModelParams, PlaneWaveBasis, SteadyState,
                    load_state_params, make_symmetric_params)
from .observables import classify_phase, order_parameters
from .sweep import SweepSpec, detect_boundaries, resume_sweep, run_sweep
from . import svg as svgmod

EXIT_OK = 0
EXIT_FLAG = 1
EXIT_UNCONVERGED = 2
EXIT_UNSTABLE = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _resolve(name, flag_value, config: dict, default, cast=float):
    """defaults < config file < environment < flags."""
    value = default
    if name in config:
        value = config[name]
    env = os.environ.get("RCSOC_" + name.upper().replace("-", "_"))
    if env is not None:
        value = env
    if flag_value is not None:
        value = flag_value
    if value is None:
        return None
    return cast(value) if cast is not None else value


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _solver_config(args, config) -> SolverConfig:
    return SolverConfig(
        n_seeds=_resolve("seeds", args.seeds, config, 4, int),
        seed0=_resolve("seed", args.seed, config, 0, int),
        tol_psi=_resolve("tol", args.tol, config, 1e-9, float),
        tol_field=_resolve("tol", args.tol, config, 1e-9, float),
        max_iters=_resolve("max-iters", args.max_iters, config, 200_000,
                           int))


def _basis(args, config) -> PlaneWaveBasis:
    return PlaneWaveBasis(
        cutoff=_resolve("j", args.j, config, 12, int),
        n_grid=_resolve("n-grid", args.n_grid, config, 128, int))


def _point_summary(state: SteadyState, p: ModelParams, eta, delta,
                   stability) -> tuple[str, str]:
    pt = order_parameters(state.spinor, state.cavity, state.mu,
                          eta=eta, delta=delta)
    pt.converged = state.converged
    pt.diverged = state.diverged
    label = classify_phase(pt, stability=stability)
    line = (f"{label}  W={pt.winding}  |N_dn|={abs(pt.nw_dn):.6f}  "
            f"|alpha_-|={abs(state.cavity.alpha_m):.6f}  "
            f"mu={state.mu:.8f}")
    return label, line


# ----------------------------------------------------------------------
# solve
# ----------------------------------------------------------------------

def cmd_solve(args) -> int:
    config = _load_config(args.config)
    delta = _resolve("delta", args.delta, config, None)
    eta = _resolve("eta", args.eta, config, None)
    if delta is None or eta is None:
        sys.stderr.write("error: --delta and --eta are required\n")
        return EXIT_USAGE
    p = make_symmetric_params(delta, eta)
    cfg = _solver_config(args, config)
    basis = _basis(args, config)
    t0 = time.time()
    state = solve_steady_state(p, cfg, basis=basis)
    stability = None
    if state.converged and not state.diverged:
        try:
            spec = excitation_spectrum(build_bogoliubov_matrix(state, p))
            stability = stability_check(spec).stable
        except NotConvergedError:
            stability = None
    label, line = _point_summary(state, p, eta, delta, stability)
    print(line)
    if args.out:
        state.save(args.out, params=p)
        print(f"state written to {args.out}  "
              f"[{time.time() - t0:.1f}s, {state.iterations} iterations]")
    if state.diverged or label == "UNSTABLE":
        return EXIT_UNSTABLE
    if not state.converged:
        return EXIT_UNCONVERGED
    return EXIT_OK


# ----------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------

def _sweep_spec(args, config) -> SweepSpec:
    if args.spec:
        with open(args.spec) as fh:
            return SweepSpec.from_dict(json.load(fh))
    cut = _resolve("cut", args.cut, config, None, str)
    if cut:
        name, _, value = cut.partition("=")
        if name.strip() != "delta":
            raise SystemExit(EXIT_USAGE)
        delta = float(value)
        return SweepSpec(
            eta_min=_resolve("eta-min", args.eta_min, config, 0.0),
            eta_max=_resolve("eta-max", args.eta_max, config, 60.0),
            eta_steps=_resolve("eta-steps", args.eta_steps, config, 61,
                               int),
            delta_min=delta, delta_max=delta, delta_steps=1,
            solver=_solver_config(args, config),
            with_spectrum=bool(args.with_spectrum),
            direction=_resolve("direction", args.direction, config,
                               "both", str))
    return SweepSpec(
        eta_min=_resolve("eta-min", args.eta_min, config, 0.0),
        eta_max=_resolve("eta-max", args.eta_max, config, 90.0),
        eta_steps=_resolve("eta-steps", args.eta_steps, config, 30, int),
        delta_min=_resolve("delta-min", args.delta_min, config, -30.0),
        delta_max=_resolve("delta-max", args.delta_max, config, -4.0),
        delta_steps=_resolve("delta-steps", args.delta_steps, config, 30,
                             int),
        solver=_solver_config(args, config),
        with_spectrum=bool(args.with_spectrum),
        direction=_resolve("direction", args.direction, config, "both",
                           str))


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(_resolve("out", args.out, config, "sweep_out", str))
    if args.resume:
        result = resume_sweep(Path(args.resume), out_dir=out_dir,
                              jobs=args.jobs or 1)
    else:
        spec = _sweep_spec(args, config)
        result = run_sweep(spec, out_dir=out_dir, jobs=args.jobs or 1)
    csv_path = out_dir / "phase_points.csv"
    bounds = detect_boundaries(result)
    if result.spec.delta_steps > 1:
        svgmod.phase_diagram_svg(csv_path, out_dir / "phase_diagram.svg",
                                 color_by="abs_nw_dn", boundaries=bounds,
                                 title="atomic phase diagram")
        svgmod.phase_diagram_svg(csv_path, out_dir / "cavity_diagram.svg",
                                 color_by="abs_alpha_m", boundaries=bounds,
                                 title="cavity-field phase diagram")
    else:
        svgmod.cut_plot_svg(csv_path, out_dir / "cut.svg",
                            title=f"cut at delta="
                                  f"{result.spec.delta_min:g}")
        if args.momenta:
            rows = []
            for r in result.rows:
                rows.append((float(result.spec.etas[r["i_eta"]]),
                             {(c, j): r.get("momenta", {}).get(
                                 f"{c},{j}", 0.0)
                              for c in ("dn", "up")
                              for j in range(-3, 4)}))
            svgmod.momenta_plot_svg(rows, out_dir / "momenta.svg",
                                    title="momentum amplitudes")
    labels = {r["label"] for r in result.rows}
    print(f"sweep complete: {len(result.rows)} points, labels: "
          f"{sorted(labels)}; outputs in {out_dir}")
    return EXIT_OK


# ----------------------------------------------------------------------
# spectrum
# ----------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(_resolve("out", args.out, config, "spectrum_out", str))
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.state:
        state = SteadyState.load(args.state)
        p = load_state_params(args.state)
        if p is None:
            sys.stderr.write("error: state file lacks embedded "
                             "parameters\n")
            return EXIT_USAGE
        try:
            mb = build_bogoliubov_matrix(state, p)
        except NotConvergedError:
            return EXIT_UNCONVERGED
        from .bogoliubov import lowest_branches, mode_sector, \
            goldstone_index
        es = excitation_spectrum(mb)
        gold = goldstone_index(es, state)
        lines = ["eta,delta,branch_index,re_omega,im_omega,"
                 "even_odd_sector,goldstone_flag"]
        for b, (re, im, idx) in enumerate(lowest_branches(es, state,
                                                          n=5)):
            lines.append(
                f"{p.eta_p:.12e},{p.delta_a:.12e},{b},{re:.12e},"
                f"{im:.12e},{mode_sector(es, idx, state)},"
                f"{1 if idx == gold else 0}")
        (out_dir / "spectrum.csv").write_text("\n".join(lines) + "\n")
        stab = stability_check(es)
        print(f"spectrum written; max Im(omega) = {stab.max_imag:.3e}"
              f" ({'stable' if stab.stable else 'UNSTABLE'})")
        return EXIT_OK if stab.stable else EXIT_UNSTABLE
    cut = _resolve("cut", args.cut, config, None, str)
    if not cut:
        sys.stderr.write("error: need --state or --cut delta=...\n")
        return EXIT_USAGE
    name, _, value = cut.partition("=")
    if name.strip() != "delta":
        return EXIT_USAGE
    spec = SweepSpec(
        eta_min=_resolve("eta-min", args.eta_min, config, 0.0),
        eta_max=_resolve("eta-max", args.eta_max, config, 60.0),
        eta_steps=_resolve("eta-steps", args.eta_steps, config, 31, int),
        delta_min=float(value), delta_max=float(value), delta_steps=1,
        solver=_solver_config(args, config), with_spectrum=True,
        direction=_resolve("direction", args.direction, config, "both",
                           str))
    result = run_sweep(spec, out_dir=out_dir, jobs=args.jobs or 1)
    svgmod.spectrum_plot_svg(out_dir / "spectrum.csv",
                             out_dir / "spectrum.svg",
                             title=f"collective excitations, delta="
                                   f"{float(value):g}")
    print(f"spectrum cut written to {out_dir}")
    return EXIT_OK


# ----------------------------------------------------------------------
# dynamics
# ----------------------------------------------------------------------

def cmd_dynamics(args) -> int:
    config = _load_config(args.config)
    state = SteadyState.load(args.state)
    p = load_state_params(args.state)
    if p is None:
        sys.stderr.write("error: state file lacks embedded parameters\n")
        return EXIT_USAGE
    t_final = _resolve("t", args.t, config, 50.0)
    dt = _resolve("dt", args.dt, config, 1e-3)
    traj = propagate_effective(state, p, t_final=t_final, dt=dt)
    report = drift_report(traj)
    out_dir = Path(_resolve("out", args.out, config, "dynamics_out", str))
    out_dir.mkdir(parents=True, exist_ok=True)
    traj.export_jsonl(out_dir / "trajectory.jsonl")
    (out_dir / "drift_report.json").write_text(
        json.dumps({k: v for k, v in report.items()}, indent=1,
                   sort_keys=True) + "\n")
    print(f"max observable drift over t={t_final:g}: "
          f"{report['max_drift']:.3e}")
    code = EXIT_OK if report["max_drift"] < 1e-4 else EXIT_FLAG

    if args.lambda_check:
        dsum = _resolve("det-sum", args.det_sum, config, -200.0)
        rows = []
        for scale in (1.0, 2.0, 4.0):
            ds = dsum * scale
            g = np.sqrt(abs(p.u0_dn * ds) / 2.0) * np.sign(1.0)
            lp = LambdaParams.from_microscopic(g, g, ds / 2, ds / 2, p)
            state3 = ThreeLevelField.from_ground(state.spinor)
            state3.psi[2] = excited_steady_state(
                state3.psi, state.cavity.as_vector(), lp,
                state.spinor.basis)
            traj3 = propagate_lambda(state3, lp, t_final=2.0,
                                     dt=min(2e-4, 0.02 / abs(ds)),
                                     a0=state.cavity.as_vector())
            res = adiabatic_residual(traj3, lp, state.spinor.basis)
            ne = traj3.series("n_e")
            rel = float(res[-1] / max(np.sqrt(ne[-1]), 1e-30))
            rows.append((ds, rel))
            print(f"  det_sum={ds:8.1f}: elimination residual "
                  f"{rel:.3e}")
        if rows[-1][1] > 0.05:
            code = max(code, EXIT_FLAG)
    return code


# ----------------------------------------------------------------------
# classify
# ----------------------------------------------------------------------

def cmd_classify(args) -> int:
    state = SteadyState.load(args.state)
    p = load_state_params(args.state)
    if p is None:
        sys.stderr.write("error: state file lacks embedded parameters\n")
        return EXIT_USAGE
    stability = None
    if state.converged and not state.diverged:
        try:
            es = excitation_spectrum(build_bogoliubov_matrix(state, p))
            stability = stability_check(es).stable
        except NotConvergedError:
            stability = None
    label, line = _point_summary(state, p, p.eta_p, p.delta_a, stability)
    print(line)
    if label == "UNSTABLE":
        return EXIT_UNSTABLE
    if label == "UNCONVERGED":
        return EXIT_UNCONVERGED
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> _Parser:
    ap = _Parser(prog="rcsoc",
                 description="Mean-field simulator for a two-component "
                             "condensate coupled to four ring-cavity "
                             "modes")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file overlay")
        p.add_argument("--seed", type=int)
        p.add_argument("--seeds", type=int, help="random seeds per solve")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iters", type=int)
        p.add_argument("--j", type=int, help="plane-wave cutoff")
        p.add_argument("--n-grid", type=int)
        p.add_argument("--out")

    p = sub.add_parser("solve", help="single self-consistent solve")
    common(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--eta", type=float)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="phase-diagram scan")
    common(p)
    p.add_argument("--spec", help="sweep spec JSON file")
    p.add_argument("--resume", help="checkpoint.jsonl to resume")
    p.add_argument("--cut", help="delta=VALUE for a 1D pump cut")
    p.add_argument("--eta-min", type=float)
    p.add_argument("--eta-max", type=float)
    p.add_argument("--eta-steps", type=int)
    p.add_argument("--delta-min", type=float)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--delta-steps", type=int)
    p.add_argument("--direction", choices=("up", "down", "both"))
    p.add_argument("--with-spectrum", action="store_true")
    p.add_argument("--momenta", action="store_true",
                   help="emit momentum-amplitude plot for cuts")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="collective excitation spectrum")
    common(p)
    p.add_argument("--state", help="state JSON file")
    p.add_argument("--cut", help="delta=VALUE for a spectrum cut")
    p.add_argument("--eta-min", type=float)
    p.add_argument("--eta-max", type=float)
    p.add_argument("--eta-steps", type=int)
    p.add_argument("--direction", choices=("up", "down", "both"))
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("dynamics", help="real-time stability run")
    common(p)
    p.add_argument("--state", required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--lambda-check", action="store_true",
                   help="validate the adiabatic elimination against the "
                        "three-level model")
    p.add_argument("--det-sum", type=float)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("classify", help="label a stored state")
    common(p)
    p.add_argument("--state", required=True)
    p.set_defaults(func=cmd_classify)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
