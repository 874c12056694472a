"""Command-line entry points.

Subcommands: solve (forward run), adjoint (adjoint state of a scenario),
grad-check (three-way derivative comparison), optimize (full design loop),
gamma-sweep (interface-width sweep), profile (1D transition-cost
experiment).  Exit codes: 0 success, 2 configuration/validation error,
3 solver divergence.
"""

import argparse
import os
import sys

import numpy as np

from .adjoint import solve_adjoint
from .errors import LinearSolveError, PicardDivergenceError, ScenarioError
from .fileio import write_field, write_log, write_manifest, write_trajectory
from .gradient import (fd_directional, objective_from_state, reduced_gradient,
                       solve_sensitivity, tracking_derivative)
from .medium import gl_gradient, interpolate_coefficients
from .optimizer import optimize
from .scenario import load_scenario
from .sharp import PROFILE_CONSTANT, eps_sweep, optimal_profile_energy
from .wave import energy_identity_residual


def _smooth_modes(grid, rng, n_modes=3):
    x = grid.node_xy[:, 0] / grid.lx
    y = grid.node_xy[:, 1] / grid.ly
    field = np.zeros(grid.n_nodes)
    for m in range(1, n_modes + 1):
        for n in range(1, n_modes + 1):
            field += rng.normal() * np.sin(np.pi * m * x) * np.sin(np.pi * n * y)
    return field / np.max(np.abs(field))


def probe_point(grid, seed: int):
    """Deterministic interior phase field and unit probe direction for
    derivative checks.  The direction is a localized positive bump (a
    sign-changing direction can cancel the pairing almost exactly, leaving
    nothing but discretization noise to compare); the base field stays
    clear of the box bounds so central differences remain feasible."""
    rng = np.random.default_rng(seed)
    phi = 0.5 + 0.2 * _smooth_modes(grid, rng)
    cx = grid.lx * rng.uniform(0.3, 0.7)
    cy = grid.ly * rng.uniform(0.3, 0.7)
    w = 0.15 * max(grid.lx, grid.ly)
    x, y = grid.node_xy[:, 0], grid.node_xy[:, 1]
    h = np.exp(-(((x - cx) / w) ** 2 + ((y - cy) / w) ** 2))
    return phi, h


def _cmd_solve(scn, outdir, args):
    state, report = scn.solve_state(scn.phi0)
    write_trajectory(outdir, scn.grid, state.u, "u")
    coeffs = interpolate_coefficients(scn.phi0, scn.mp)
    res = energy_identity_residual(state, coeffs, scn.alpha, scn.src)
    write_log(os.path.join(outdir, "energy_identity.csv"),
              [{"step": n + 1, "time": (n + 1) * scn.tau, "residual": r}
               for n, r in enumerate(res)])
    write_log(os.path.join(outdir, "picard.csv"),
              [{"sweep": i + 1, "update_norm": u}
               for i, u in enumerate(report.update_norms)])
    write_manifest(outdir, scn, seed=args.seed,
                   resolution_scale=args.resolution_scale,
                   extras={"command": "solve", "picard_sweeps": report.sweeps})
    print(f"solve: {report.sweeps} sweeps, outputs in {outdir}")
    return 0


def _cmd_adjoint(scn, outdir, args):
    state, _ = scn.solve_state(scn.phi0)
    adj = solve_adjoint(scn.grid, scn.phi0, scn.mp, scn.alpha, state,
                        scn.target(), scn.d_mask)
    write_trajectory(outdir, scn.grid, adj.p, "p")
    write_manifest(outdir, scn, seed=args.seed,
                   resolution_scale=args.resolution_scale,
                   extras={"command": "adjoint"})
    print(f"adjoint: {scn.n_steps + 1} snapshots in {outdir}")
    return 0


def _fd_probe(payload):
    config, scale, phi, h, delta = payload
    from .scenario import scenario_from_config
    scn = scenario_from_config(config, resolution_scale=scale)
    return fd_directional(phi, h, delta, scn)


def _cmd_grad_check(scn, outdir, args):
    grid = scn.grid
    phi, h = probe_point(grid, args.seed)
    state, _ = scn.solve_state(phi)
    adj = solve_adjoint(grid, phi, scn.mp, scn.alpha, state, scn.target(),
                        scn.d_mask)
    grad = reduced_gradient(phi, state, adj, scn.mp, scn.glp, grid, scn.tau)
    adj_pairing = float(grad.total @ h)
    ustar = solve_sensitivity(phi, h, state, grid, scn.mp, scn.alpha,
                              scn.tau, scn.n_steps)
    sens_pairing = tracking_derivative(state, ustar, scn.target(), scn.m_d,
                                       scn.tau) + float(gl_gradient(grid, phi, scn.glp) @ h)
    deltas = [1e-3, 1e-4, 1e-5]
    payloads = [(scn.config, args.resolution_scale, phi, h, d) for d in deltas]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            fd_vals = list(pool.map(_fd_probe, payloads))
    else:
        fd_vals = [_fd_probe(p) for p in payloads]
    fd_ref = fd_vals[1]

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b))

    rows = [{"route": "adjoint", "value": adj_pairing,
             "rel_vs_adjoint": 0.0},
            {"route": "sensitivity", "value": sens_pairing,
             "rel_vs_adjoint": rel(sens_pairing, adj_pairing)}]
    rows += [{"route": f"fd_delta_{d:g}", "value": v,
              "rel_vs_adjoint": rel(v, adj_pairing)}
             for d, v in zip(deltas, fd_vals)]
    write_log(os.path.join(outdir, "gradcheck.csv"), rows)
    write_manifest(outdir, scn, seed=args.seed,
                   resolution_scale=args.resolution_scale,
                   extras={"command": "grad-check"})
    for row in rows:
        print(f"{row['route']:>14s}  {row['value']: .10e}  "
              f"rel vs adjoint {row['rel_vs_adjoint']:.3e}")
    worst = max(rel(adj_pairing, sens_pairing), rel(adj_pairing, fd_ref),
                rel(sens_pairing, fd_ref))
    print(f"worst pairwise relative difference: {worst:.3e}")
    return 0


def _cmd_optimize(scn, outdir, args):
    result = optimize(scn.phi0, scn)
    rows = [{"iteration": r.iteration, "tracking": r.objective.tracking,
             "gl": r.objective.gl, "total": r.objective.total,
             "stationarity": r.stationarity, "step": r.step,
             "picard_sweeps": r.picard_sweeps} for r in result.history]
    write_log(os.path.join(outdir, "history.csv"), rows)
    write_field(os.path.join(outdir, "phi_initial.vtk"), scn.grid, scn.phi0,
                name="phi")
    write_field(os.path.join(outdir, "phi_final.vtk"), scn.grid, result.phi,
                name="phi")
    write_manifest(outdir, scn, seed=args.seed,
                   resolution_scale=args.resolution_scale,
                   extras={"command": "optimize", "status": result.status})
    last = result.history[-1]
    print(f"optimize: {result.status} after {last.iteration} iterations, "
          f"objective {last.objective.total:.6e}, outputs in {outdir}")
    return 0


def _cmd_gamma_sweep(scn, outdir, args):
    eps_list = args.eps or [0.08, 0.04, 0.02]
    sweep = eps_sweep(scn, eps_list, cold_start=args.cold_start, jobs=args.jobs)
    rows = []
    for row in sweep.rows:
        rows.append({"eps": row.eps,
                     "objective": row.objective if row.objective is not None else "",
                     "gl_energy": row.gl_energy if row.gl_energy is not None else "",
                     "sharp_perimeter_cost": row.sharp_perimeter_cost
                     if row.sharp_perimeter_cost is not None else "",
                     "sharp_objective": row.sharp_objective
                     if row.sharp_objective is not None else "",
                     "status": row.status})
    write_log(os.path.join(outdir, "sweep.csv"), rows)
    if sweep.l1_diffs:
        write_log(os.path.join(outdir, "l1_diffs.csv"),
                  [{"pair": i, "l1": v} for i, v in enumerate(sweep.l1_diffs)])
    for eps, phi in zip([r.eps for r in sweep.rows], sweep.fields):
        if phi is not None:
            write_field(os.path.join(outdir, f"phi_eps_{eps:g}.vtk"),
                        scn.grid, phi, name="phi")
    write_manifest(outdir, scn, seed=args.seed,
                   resolution_scale=args.resolution_scale,
                   extras={"command": "gamma-sweep", "eps_list": eps_list})
    for row in rows:
        print(row)
    return 0


def _cmd_profile(args):
    eps_list = args.eps or [0.1, 0.05]
    rows = []
    for eps in eps_list:
        val = optimal_profile_energy(eps, n_nodes=args.nodes)
        rows.append({"eps": eps, "energy": val, "target": PROFILE_CONSTANT,
                     "rel_error": abs(val - PROFILE_CONSTANT) / PROFILE_CONSTANT})
        print(f"eps={eps:g}: profile energy {val:.8f} "
              f"(pi/8 = {PROFILE_CONSTANT:.8f}, rel {rows[-1]['rel_error']:.2e})")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_log(os.path.join(args.out, "profile.csv"), rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lensopt",
        description="Phase-field acoustic lens design: forward/adjoint solves, "
                    "gradient checks, optimization, sharp-interface probes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized checks")
        p.add_argument("--resolution-scale", type=int, default=1,
                       help="uniform space-time refinement factor")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for independent probes/runs")

    common(sub.add_parser("solve", help="forward run with diagnostics"))
    common(sub.add_parser("adjoint", help="adjoint state of the scenario"))
    common(sub.add_parser("grad-check", help="three-way gradient comparison"))
    common(sub.add_parser("optimize", help="projected-gradient design loop"))
    p_sweep = sub.add_parser("gamma-sweep", help="interface-width sweep")
    common(p_sweep)
    p_sweep.add_argument("--eps", type=float, action="append",
                         help="interface width (repeatable)")
    p_sweep.add_argument("--cold-start", action="store_true",
                         help="independent runs instead of warm starts")
    p_prof = sub.add_parser("profile", help="1D transition-cost constant")
    p_prof.add_argument("--eps", type=float, action="append",
                        help="interface width (repeatable)")
    p_prof.add_argument("--nodes", type=int, default=2000)
    p_prof.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "profile":
            return _cmd_profile(args)
        scn = load_scenario(args.config, resolution_scale=args.resolution_scale)
        outdir = args.out or scn.output_dir
        os.makedirs(outdir, exist_ok=True)
        handler = {"solve": _cmd_solve, "adjoint": _cmd_adjoint,
                   "grad-check": _cmd_grad_check, "optimize": _cmd_optimize,
                   "gamma-sweep": _cmd_gamma_sweep}[args.command]
        return handler(scn, outdir, args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (PicardDivergenceError, LinearSolveError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
