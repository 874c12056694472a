"""Reduced objective, its adjoint-based gradient, and the cross-checks.

The reduced objective of a phase field is

    j(phi) = (1/2) int_0^T int_D (S(phi) - u_d)^2 + gamma E_eps(phi),

and its derivative is assembled from three coefficient pairings against the
adjoint state p (c-, b-, k-parts) plus the Ginzburg-Landau load:

    <G, h> = gamma eps (grad phi, grad h) + (gamma/eps)(Psi0'(phi), h)
             - int_t ((c^2)'(phi) h grad u + b'(phi) h grad u_t) . grad p
             + int_t 2 k'(phi) h u_t^2 p.

Two independent routes check it: the linearized-sensitivity path u* with
the tracking pairing int_t int_D (u - u_d) u*, and central finite
differences of j itself.  All duality pairings use the same trapezoidal
time quadrature as the tracking term.
"""

from dataclasses import dataclass

import numpy as np

from .adjoint import AdjointTrajectory
from .errors import InfeasiblePhaseFieldError
from .grid import Grid, assemble_graddot_load, assemble_weighted_stiffness, solve_spd
from .medium import (GLParams, MediumParams, coefficient_derivatives,
                     gl_energy, gl_gradient, interpolate_coefficients)
from .wave import (DEFAULT_LIN_TOL, AlphaCoefficient, SourceSpec,
                   WaveTrajectory, _march, time_weights)


@dataclass
class ObjectiveValue:
    """Tracking misfit, weighted interface energy, and their sum."""

    tracking: float
    gl: float

    @property
    def total(self) -> float:
        return self.tracking + self.gl


@dataclass
class GradientField:
    """Nodal gradient load with its additive breakdown; <total, h> is the
    discrete directional derivative for nodal directions h."""

    gl_part: np.ndarray
    c_part: np.ndarray
    b_part: np.ndarray
    k_part: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.gl_part + self.c_part + self.b_part + self.k_part

    @property
    def pde_part(self) -> np.ndarray:
        return self.c_part + self.b_part + self.k_part


def tracking_misfit(state: WaveTrajectory, u_d, m_d, tau: float) -> float:
    """(1/2) int_0^T int_D (u - u_d)^2, trapezoidal in time."""
    diff = state.u - np.asarray(u_d, dtype=float)
    vals = np.einsum("ni,ni->n", diff, (m_d @ diff.T).T)
    return float(0.5 * tau * (time_weights(state.n_steps) @ vals))


def objective_from_state(phi, state: WaveTrajectory, scenario) -> ObjectiveValue:
    track = tracking_misfit(state, scenario.target(), scenario.m_d, scenario.tau)
    gl = scenario.glp.gamma * gl_energy(scenario.grid, phi, scenario.glp)
    return ObjectiveValue(tracking=track, gl=gl)


def evaluate_objective(phi, scenario) -> ObjectiveValue:
    """Solve the state at phi and evaluate the reduced objective."""
    state, _ = scenario.solve_state(phi)
    return objective_from_state(phi, state, scenario)


def solve_sensitivity(phi, h, state: WaveTrajectory, grid: Grid, mp: MediumParams,
                      alpha: AlphaCoefficient, tau: float, n_steps: int,
                      lin_tol: float = DEFAULT_LIN_TOL,
                      lin_solver: str = "auto") -> WaveTrajectory:
    """Directional derivative u* of the control-to-state map at phi in
    direction h: linear march with zero initial data and sources

        -((c^2)'(phi) h grad u + b'(phi) h grad u_t) . grad v
        + 4 k(phi) u_t u*_t v + 2 k'(phi) h u_t^2 v,

    the u*_t coupling estimated at the central level like the adjoint's.
    """
    h = np.asarray(h, dtype=float)
    coeffs = interpolate_coefficients(phi, mp)
    dcsq, db, dk = coefficient_derivatives(phi, mp)
    k_csq = assemble_weighted_stiffness(grid, coeffs.csq)
    k_b = assemble_weighted_stiffness(grid, coeffs.b)
    k_dc = assemble_weighted_stiffness(grid, dcsq * h)
    k_db = assemble_weighted_stiffness(grid, db * h)
    mass1 = grid.mass
    four_k = 4.0 * coeffs.k
    two_dk_h = 2.0 * dk * h

    def extra(n, ustar_n, vstar_est):
        load = -(k_dc @ state.u[n]) - (k_db @ state.v[n])
        load += mass1 @ (four_k * state.v[n] * vstar_est
                         + two_dk_h * state.v[n] * state.v[n])
        return load

    return _march(grid, alpha, k_csq, k_b, SourceSpec.zero(grid), tau, n_steps,
                  extra, lin_tol, lin_solver=lin_solver)


def reduced_gradient(phi, state: WaveTrajectory, adjoint: AdjointTrajectory,
                     mp: MediumParams, glp: GLParams, grid: Grid,
                     tau: float) -> GradientField:
    """Assemble the nodal gradient load from state and adjoint at the same
    phi, plus the Ginzburg-Landau load; parts are stored separately."""
    if adjoint.p.shape != state.u.shape:
        raise ValueError("state and adjoint trajectories do not match")
    n_steps = state.n_steps
    wts = tau * time_weights(n_steps)
    dcsq, db, dk = coefficient_derivatives(phi, mp)

    w_c = np.zeros(grid.n_nodes)
    w_b = np.zeros(grid.n_nodes)
    acc_k = np.zeros(grid.n_nodes)
    for n in range(n_steps + 1):
        w_c += wts[n] * assemble_graddot_load(grid, state.u[n], adjoint.p[n])
        w_b += wts[n] * assemble_graddot_load(grid, state.v[n], adjoint.p[n])
        acc_k += wts[n] * (2.0 * state.v[n] * state.v[n] * adjoint.p[n])

    return GradientField(
        gl_part=gl_gradient(grid, phi, glp),
        c_part=-dcsq * w_c,
        b_part=-db * w_b,
        k_part=dk * (grid.mass @ acc_k),
    )


def tracking_derivative(state: WaveTrajectory, ustar: WaveTrajectory,
                        u_d, m_d, tau: float) -> float:
    """Tracking-term derivative through the sensitivity path:
    int_0^T int_D (u - u_d) u*; the independent counterpart of the
    adjoint pairing <pde_part, h>."""
    diff = state.u - np.asarray(u_d, dtype=float)
    vals = np.einsum("ni,ni->n", diff, (m_d @ ustar.u.T).T)
    return float(tau * (time_weights(state.n_steps) @ vals))


def fd_directional(phi, h, delta: float, scenario) -> float:
    """Central difference (j(phi + delta h) - j(phi - delta h)) / (2 delta).

    Both probe points must stay inside the box; the caller shrinks delta or
    the support of h otherwise.
    """
    phi = np.asarray(phi, dtype=float)
    h = np.asarray(h, dtype=float)
    for sign in (+1.0, -1.0):
        probe = phi + sign * delta * h
        if probe.min() < -1e-12 or probe.max() > 1.0 + 1e-12:
            raise InfeasiblePhaseFieldError(
                "finite-difference probe leaves the box; reduce delta or h")
    plus = evaluate_objective(np.clip(phi + delta * h, 0.0, 1.0), scenario)
    minus = evaluate_objective(np.clip(phi - delta * h, 0.0, 1.0), scenario)
    return (plus.total - minus.total) / (2.0 * delta)


def smooth_gradient(grad, grid: Grid, sigma: float) -> np.ndarray:
    """Riesz representative of the gradient load: solves
    (sigma^2 K1 + M1) g = G.  sigma = 0 gives the plain L2 representative;
    sigma > 0 additionally smooths on length scale sigma.  The pairing is
    preserved: <G, h> = <g, h>_{sigma^2 K + M}."""
    if sigma < 0.0:
        raise ValueError("smoothing length must be >= 0")
    load = grad.total if isinstance(grad, GradientField) else np.asarray(grad, dtype=float)
    op = grid.mass if sigma == 0.0 else (sigma**2 * grid.stiffness + grid.mass).tocsr()
    return solve_spd(op, load, tol=1e-12, jacobi=True)
