"""Projected-gradient minimization over the box-constrained phase field.

Each iteration solves state + adjoint, assembles the reduced gradient G,
maps it to a descent representative (L2 by default, optionally H1-smoothed)
and backtracks along the projection arc phi -> P(phi - s d) with an Armijo
test on the pairing decrease <G, phi - trial>.  Feasibility is exact at
every iterate (clamping, never penalties), the accepted objective history
is non-increasing by construction, and first-order stationarity is measured
as || phi - P(phi - d) || in the discrete L2 norm, the projected form of
the gradient variational inequality.
"""

from dataclasses import dataclass, field

import numpy as np

from .adjoint import solve_adjoint
from .errors import PicardDivergenceError
from .gradient import (GradientField, ObjectiveValue, objective_from_state,
                       reduced_gradient, smooth_gradient)
from .grid import Grid, norm_l2
from .medium import project_box


@dataclass
class OptimizerConfig:
    step0: float = 1.0
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_iterations: int = 30
    stationarity_tol: float = 1e-6
    smoothing_sigma: float = 0.0
    history_stride: int = 1
    max_backtracks: int = 30
    step_growth: float = 2.0
    bb_seed: bool = False          # Barzilai-Borwein step seed, off for determinism
    pin_fluid_in_focal: bool = False

    def __post_init__(self):
        if not 0.0 < self.armijo_c1 < 1.0:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.step0 <= 0.0 or self.max_iterations < 0 or self.history_stride < 1:
            raise ValueError("invalid optimizer configuration")
        if self.smoothing_sigma < 0.0 or self.stationarity_tol <= 0.0:
            raise ValueError("invalid optimizer configuration")


@dataclass
class IterateRecord:
    iteration: int
    objective: ObjectiveValue
    stationarity: float
    step: float
    picard_sweeps: int


@dataclass
class OptimizeResult:
    phi: np.ndarray
    history: list = field(default_factory=list)
    status: str = ""


def stationarity_measure(grid: Grid, phi, direction) -> float:
    """|| phi - P(phi - direction) || in the discrete L2 norm; zero iff the
    box variational inequality holds for this gradient representative."""
    phi = np.asarray(phi, dtype=float)
    return norm_l2(grid, phi - project_box(phi - np.asarray(direction, dtype=float)))


def optimize(phi0, scenario, cfg: OptimizerConfig | None = None) -> OptimizeResult:
    """Run projected-gradient descent from phi0 on the scenario's objective.

    Returns the final phase field, the per-iterate history, and a status in
    {"converged", "max_iterations", "stalled"}.  Line-search failure after
    `max_backtracks` halvings is reported as "stalled" (convergence-by-stall
    when no descent remains along the projection arc).  Picard divergence
    aborts with the offending iterate attached.
    """
    if cfg is None:
        cfg = scenario.opt
    grid = scenario.grid

    if cfg.pin_fluid_in_focal:
        pinned = np.asarray(scenario.d_mask, dtype=float) >= 0.5

        def proj(z):
            out = project_box(z)
            out[pinned] = 1.0
            return out
    else:
        proj = project_box

    phi = proj(np.asarray(phi0, dtype=float))
    try:
        state, report = scenario.solve_state(phi)
    except PicardDivergenceError as exc:
        raise PicardDivergenceError(f"at initial iterate: {exc}") from exc
    obj = objective_from_state(phi, state, scenario)

    history: list[IterateRecord] = []
    status = "max_iterations"
    step_used = 0.0
    step_init = cfg.step0
    prev_phi = None
    prev_grad = None

    for it in range(cfg.max_iterations + 1):
        adj = solve_adjoint(grid, phi, scenario.mp, scenario.alpha, state,
                            scenario.target(), scenario.d_mask)
        grad = reduced_gradient(phi, state, adj, scenario.mp, scenario.glp,
                                grid, scenario.tau)
        g_total = grad.total
        direction = smooth_gradient(grad, grid, cfg.smoothing_sigma)
        stat = stationarity_measure(grid, phi, direction)

        rec = IterateRecord(iteration=it, objective=obj, stationarity=stat,
                            step=step_used, picard_sweeps=report.sweeps)
        if it % cfg.history_stride == 0:
            history.append(rec)
        if stat <= cfg.stationarity_tol:
            status = "converged"
            break
        if it == cfg.max_iterations:
            status = "max_iterations"
            break

        if cfg.bb_seed and prev_phi is not None:
            dphi = phi - prev_phi
            dgrad = g_total - prev_grad
            denom = dphi @ dgrad
            if denom > 0.0:
                step_init = float(dphi @ dphi / denom)
        prev_phi, prev_grad = phi.copy(), g_total.copy()

        def line_search(d, s):
            for _ in range(cfg.max_backtracks):
                trial = proj(phi - s * d)
                pairing = float(g_total @ (phi - trial))
                if pairing <= 0.0:
                    s *= cfg.backtrack
                    continue
                try:
                    t_state, t_report = scenario.solve_state(trial)
                except PicardDivergenceError as exc:
                    raise PicardDivergenceError(
                        f"at iterate {it}, trial step {s:g}: {exc}") from exc
                t_obj = objective_from_state(trial, t_state, scenario)
                if t_obj.total <= obj.total - cfg.armijo_c1 * pairing:
                    return trial, t_state, t_report, t_obj, s
                s *= cfg.backtrack
            return None

        found = line_search(direction, step_init)
        if found is None and cfg.smoothing_sigma > 0.0:
            # the smoothed direction can lose descent under projection;
            # retry along the plain L2 representative before giving up
            found = line_search(smooth_gradient(grad, grid, 0.0), step_init)
        if found is None:
            status = "stalled"
            break
        trial, trial_state, trial_report, trial_obj, s = found

        phi, state, report, obj = trial, trial_state, trial_report, trial_obj
        step_used = s
        step_init = s * cfg.step_growth

    if not history or history[-1] is not rec:
        history.append(rec)
    return OptimizeResult(phi=phi, history=history, status=status)
