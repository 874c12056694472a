"""Semilinear strongly damped wave solves on a fixed phase field.

State problem (weak form, all t):

    (alpha u_tt, v) + (c^2(phi) grad u + b(phi) grad u_t, grad v)
        = (2 k(phi) u_t^2, v) + (f, v) + <g, v>_Gamma,
    (u, u_t)|_{t=0} = (u0, u1).

Time discretization is a three-level implicit scheme on a uniform step tau:

    M_a (u^{n+1} - 2u^n + u^{n-1})/tau^2 + K_c (u^{n+1} + u^{n-1})/2
        + K_b (u^{n+1} - u^{n-1})/(2 tau) = F^n,

unconditionally stable for the damped linear problem and second-order
accurate; the start-up level comes from a Taylor expansion with the
acceleration solved from the t=0 equation.  All right-hand-side couplings
are evaluated from known data, so every step is a single SPD solve.

The semilinear problem is solved by global Picard sweeps w -> u: the
quadratic source is lagged to the previous sweep's velocity, 2 k (w_t)^2
(default), or semi-lagged as 2 k w_t u_t with the current march's velocity
estimated to second order (`semi_lagged=True`); both share the fixed point.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import LensoptError, PicardDivergenceError
from .grid import (Grid, assemble_boundary_load, assemble_weighted_mass,
                   assemble_weighted_stiffness, solve_spd)
from .medium import MediumParams, interpolate_coefficients

DEFAULT_LIN_TOL = 1e-12


# ---------------------------------------------------------------------------
# coefficients and sources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaCoefficient:
    """Non-degenerate mass coefficient alpha(x, t) with exact time
    derivatives (the adjoint needs alpha_t and alpha_tt analytically).

    fn/dt_fn/dtt_fn map (x, y, t) to values; for spatially uniform
    coefficients they are evaluated once per time level.
    """

    fn: object
    dt_fn: object
    dtt_fn: object
    low: float
    high: float
    spatially_uniform: bool = True
    time_dependent: bool = False

    def __post_init__(self):
        if not (0.0 < self.low <= self.high):
            raise ValueError("alpha bounds must satisfy 0 < low <= high")

    def _eval(self, fn, grid: Grid, t: float):
        if self.spatially_uniform:
            return float(fn(0.0, 0.0, t))
        xy = grid.node_xy
        return np.broadcast_to(fn(xy[:, 0], xy[:, 1], t), (grid.n_nodes,)).astype(float)

    def value(self, grid, t):
        return self._eval(self.fn, grid, t)

    def dt(self, grid, t):
        return self._eval(self.dt_fn, grid, t)

    def dtt(self, grid, t):
        return self._eval(self.dtt_fn, grid, t)

    @classmethod
    def constant(cls, value: float = 1.0):
        return cls(fn=lambda x, y, t: value, dt_fn=lambda x, y, t: 0.0,
                   dtt_fn=lambda x, y, t: 0.0, low=value, high=value)

    @classmethod
    def affine_t(cls, base: float, rate: float, t_final: float):
        lo = min(base, base + rate * t_final)
        hi = max(base, base + rate * t_final)
        return cls(fn=lambda x, y, t: base + rate * t,
                   dt_fn=lambda x, y, t: rate,
                   dtt_fn=lambda x, y, t: 0.0,
                   low=lo, high=hi, time_dependent=True)

    @classmethod
    def sine_t(cls, base: float, amp: float, freq: float):
        w = 2.0 * np.pi * freq
        return cls(fn=lambda x, y, t: base + amp * np.sin(w * t),
                   dt_fn=lambda x, y, t: amp * w * np.cos(w * t),
                   dtt_fn=lambda x, y, t: -amp * w * w * np.sin(w * t),
                   low=base - abs(amp), high=base + abs(amp),
                   time_dependent=True)


@dataclass
class SourceSpec:
    """Excitation data: boundary traces g per active edge (time series,
    shape (n_steps+1, edge nodes)), initial data u0/u1, and an optional
    volumetric f for linearized problems and manufactured solutions
    (callable f(x, y, t) or array of shape (n_steps+1, n_nodes))."""

    u0: np.ndarray
    u1: np.ndarray
    g_edges: dict = field(default_factory=dict)
    f: object = None

    @classmethod
    def zero(cls, grid: Grid):
        return cls(u0=np.zeros(grid.n_nodes), u1=np.zeros(grid.n_nodes))

    def validate(self, grid: Grid, n_steps: int):
        for name in ("u0", "u1"):
            arr = getattr(self, name)
            if arr.shape != (grid.n_nodes,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite field of {grid.n_nodes} values")
        for edge, series in self.g_edges.items():
            expect = (n_steps + 1, grid.edge_nodes(edge).size)
            if np.asarray(series).shape != expect:
                raise ValueError(f"g trace on {edge!r} must have shape {expect}")

    def boundary_load(self, grid: Grid, n: int) -> np.ndarray | None:
        if not self.g_edges:
            return None
        return assemble_boundary_load(
            grid, {e: series[n] for e, series in self.g_edges.items()})

    def volumetric(self, grid: Grid, n: int, tau: float) -> np.ndarray | None:
        if self.f is None:
            return None
        if callable(self.f):
            xy = grid.node_xy
            return np.asarray(self.f(xy[:, 0], xy[:, 1], n * tau), dtype=float)
        return np.asarray(self.f[n], dtype=float)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class WaveTrajectory:
    """Time series of nodal (u, u_t) plus reconstructed u_tt.

    v[0] is the prescribed initial velocity; interior v are the centered
    differences of u; end values use one-sided second-order formulas.
    """

    grid: Grid
    tau: float
    u: np.ndarray  # (n_steps+1, n_nodes)
    v: np.ndarray
    a: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.u.shape[0] - 1

    def scaled(self, factor: float) -> "WaveTrajectory":
        return WaveTrajectory(self.grid, self.tau, factor * self.u,
                              factor * self.v, factor * self.a)

    def subtract(self, other: "WaveTrajectory") -> "WaveTrajectory":
        if other.u.shape != self.u.shape or other.tau != self.tau:
            raise ValueError("trajectories are not comparable")
        return WaveTrajectory(self.grid, self.tau, self.u - other.u,
                              self.v - other.v, self.a - other.a)


def reconstruct_derivatives(tau: float, u: np.ndarray, v0: np.ndarray):
    """Centered velocity / acceleration from stored levels, one-sided
    second-order at the ends; v[0] is the prescribed initial velocity."""
    n = u.shape[0] - 1
    if n < 3:
        raise ValueError("need at least 3 time steps")
    v = np.empty_like(u)
    v[0] = v0
    v[1:n] = (u[2:] - u[:-2]) / (2.0 * tau)
    v[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * tau)
    a = np.empty_like(u)
    a[1:n] = (u[2:] - 2.0 * u[1:n] + u[:-2]) / tau**2
    a[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / tau**2
    a[n] = (2.0 * u[n] - 5.0 * u[n - 1] + 4.0 * u[n - 2] - u[n - 3]) / tau**2
    return v, a


@dataclass
class PicardReport:
    """Convergence record of the global fixed-point sweeps."""

    sweeps: int
    update_norms: list
    ratios: list
    converged: bool


def time_weights(n_steps: int) -> np.ndarray:
    """Trapezoidal weights over the n_steps+1 time levels."""
    w = np.ones(n_steps + 1)
    w[0] = w[-1] = 0.5
    return w


# ---------------------------------------------------------------------------
# the three-level march
# ---------------------------------------------------------------------------

class _StepOperators:
    """Per-step mass matrix M_{alpha^n} and the step-matrix solver.

    With time-independent alpha the step matrix is fixed, so it is
    factorized once (sparse Cholesky-like LU) and every step becomes a pair
    of triangular solves; otherwise each step falls back to warm-started
    Jacobi-preconditioned CG.  `method` can force "cg" or "direct"."""

    def __init__(self, grid, alpha, tau, k_csq, k_b, lin_tol=DEFAULT_LIN_TOL,
                 method="auto"):
        self.grid = grid
        self.alpha = alpha
        self.tau = tau
        self.lin_tol = lin_tol
        self.method = method
        self.base = (0.5 * k_csq + k_b / (2.0 * tau)).tocsr()
        self._cache = None
        self._factor = None

    def _mass_at(self, t):
        a = self.alpha
        if a.spatially_uniform:
            return a.value(self.grid, t) * self.grid.mass
        return assemble_weighted_mass(self.grid, a.value(self.grid, t))

    def mass(self, n):
        if not self.alpha.time_dependent:
            if self._cache is None:
                m = self._mass_at(0.0)
                self._cache = (m, (m / self.tau**2 + self.base).tocsr())
            return self._cache[0]
        return self._mass_at(n * self.tau)

    def step_matrix(self, n):
        if not self.alpha.time_dependent:
            self.mass(0)
            return self._cache[1]
        return (self.mass(n) / self.tau**2 + self.base).tocsr()

    def solve_step(self, n, rhs, guess):
        use_direct = (self.method == "direct"
                      or (self.method == "auto" and not self.alpha.time_dependent))
        if use_direct:
            if self._factor is None:
                self._factor = spla.splu(self.step_matrix(n).tocsc())
            return self._factor.solve(rhs)
        return solve_spd(self.step_matrix(n), rhs, tol=self.lin_tol, x0=guess,
                         jacobi=True)


def _march(grid, alpha, k_csq, k_b, src: SourceSpec, tau, n_steps,
           extra_load, lin_tol, lin_solver="auto") -> WaveTrajectory:
    """Run the three-level scheme.

    extra_load(n, u_n, v_est) -> load vector or None adds problem-specific
    source terms (quadratic nonlinearity, adjoint couplings, ...) evaluated
    at the known central level; v_est is a second-order estimate of the
    march's own velocity there.
    """
    nn = grid.n_nodes
    ops = _StepOperators(grid, alpha, tau, k_csq, k_b, lin_tol=lin_tol,
                         method=lin_solver)
    mass1 = grid.mass

    def load(n, u_n, v_est):
        out = np.zeros(nn)
        fv = src.volumetric(grid, n, tau)
        if fv is not None:
            out += mass1 @ fv
        bl = src.boundary_load(grid, n)
        if bl is not None:
            out += bl
        if extra_load is not None:
            ex = extra_load(n, u_n, v_est)
            if ex is not None:
                out += ex
        return out

    u = np.zeros((n_steps + 1, nn))
    u[0] = src.u0
    v0 = src.u1

    # start-up: u^1 = u^0 + tau u1 + tau^2/2 a^0 with a^0 from the t=0 equation
    f0 = load(0, u[0], v0)
    rhs0 = f0 - k_csq @ u[0] - k_b @ v0
    a0 = solve_spd(ops.mass(0), rhs0, tol=lin_tol, jacobi=True)
    u[1] = u[0] + tau * v0 + 0.5 * tau**2 * a0

    for n in range(1, n_steps):
        if n == 1:
            v_est = v0 + tau * a0
        else:
            v_est = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * tau)
        f_n = load(n, u[n], v_est)
        m_n = ops.mass(n)
        rhs = (f_n + m_n @ (2.0 * u[n] - u[n - 1]) / tau**2
               - 0.5 * (k_csq @ u[n - 1]) + (k_b @ u[n - 1]) / (2.0 * tau))
        guess = 2.0 * u[n] - u[n - 1]
        u[n + 1] = ops.solve_step(n, rhs, guess)
        if not np.all(np.isfinite(u[n + 1])):
            raise LensoptError(f"non-finite solution at step {n + 1}")

    v, a = reconstruct_derivatives(tau, u, v0)
    return WaveTrajectory(grid=grid, tau=tau, u=u, v=v, a=a)


# ---------------------------------------------------------------------------
# linearized and semilinear solves
# ---------------------------------------------------------------------------

def solve_linearized(grid, coeffs, alpha: AlphaCoefficient, beta, src: SourceSpec,
                     tau: float, n_steps: int, beta_velocity="self",
                     lin_tol: float = DEFAULT_LIN_TOL,
                     lin_solver: str = "auto") -> WaveTrajectory:
    """Solve the linearized problem with source 2 k(phi) beta u_t + f.

    beta is a velocity trajectory (n_steps+1, n_nodes) or None.  The u_t
    factor multiplying beta comes from `beta_velocity`:

    - "self": beta itself (fully lagged product 2 k beta^2, the Picard
      default — keeps the source independent of the unknown),
    - "march": second-order estimate of the current march's own velocity
      (the semi-lagged fixed-point map of the well-posedness argument),
    - an explicit (n_steps+1, n_nodes) array.
    """
    src.validate(grid, n_steps)
    k_csq = assemble_weighted_stiffness(grid, coeffs.csq)
    k_b = assemble_weighted_stiffness(grid, coeffs.b)
    if beta is None:
        extra = None
    else:
        beta = np.asarray(beta, dtype=float)
        two_k = 2.0 * coeffs.k
        mass1 = grid.mass

        if isinstance(beta_velocity, str) and beta_velocity == "self":
            def extra(n, u_n, v_est):
                return mass1 @ (two_k * beta[n] * beta[n])
        elif isinstance(beta_velocity, str) and beta_velocity == "march":
            def extra(n, u_n, v_est):
                return mass1 @ (two_k * beta[n] * v_est)
        else:
            vel = np.asarray(beta_velocity, dtype=float)

            def extra(n, u_n, v_est):
                return mass1 @ (two_k * beta[n] * vel[n])

    return _march(grid, alpha, k_csq, k_b, src, tau, n_steps, extra, lin_tol,
                  lin_solver=lin_solver)


def solve_state(grid, phi, mp: MediumParams, alpha: AlphaCoefficient,
                src: SourceSpec, tau: float, n_steps: int,
                picard_tol: float = 1e-10, picard_max: int = 25,
                semi_lagged: bool = False,
                lin_tol: float = DEFAULT_LIN_TOL, lin_solver: str = "auto"):
    """Fixed point of w -> u for the semilinear state problem.

    Sweeps start from the zero trajectory; each sweep solves one linearized
    problem with the nonlinearity evaluated at the previous iterate.
    Raises PicardDivergenceError when updates grow for 3 consecutive sweeps
    or the sweep cap is reached (the smallness condition on the data is
    violated).  Returns (trajectory, PicardReport).
    """
    if not (0.0 < picard_tol <= 1e-4):
        raise ValueError(f"picard_tol must lie in (0, 1e-4], got {picard_tol}")
    coeffs = interpolate_coefficients(phi, mp)
    mode = "march" if semi_lagged else "self"

    prev = WaveTrajectory(grid=grid, tau=tau,
                          u=np.zeros((n_steps + 1, grid.n_nodes)),
                          v=np.zeros((n_steps + 1, grid.n_nodes)),
                          a=np.zeros((n_steps + 1, grid.n_nodes)))
    updates, grow = [], 0
    for sweep in range(1, picard_max + 1):
        traj = solve_linearized(grid, coeffs, alpha, prev.v, src, tau, n_steps,
                                beta_velocity=mode, lin_tol=lin_tol,
                                lin_solver=lin_solver)
        diff = u_norm(traj.subtract(prev))
        ref = u_norm(traj)
        updates.append(diff)
        rel = diff / ref if ref > 0.0 else 0.0
        if rel <= picard_tol:
            ratios = [updates[i + 1] / updates[i]
                      for i in range(len(updates) - 1) if updates[i] > 0.0]
            return traj, PicardReport(sweeps=sweep, update_norms=updates,
                                      ratios=ratios, converged=True)
        if sweep >= 2 and diff > updates[-2]:
            grow += 1
            if grow >= 3:
                raise PicardDivergenceError(
                    f"fixed-point divergence: updates grew for {grow} sweeps "
                    f"(last {diff:.3e})")
        else:
            grow = 0
        prev = traj
    raise PicardDivergenceError(
        f"fixed-point iteration did not reach {picard_tol:g} in {picard_max} sweeps "
        f"(last relative update {rel:.3e})")


# ---------------------------------------------------------------------------
# norms and diagnostics
# ---------------------------------------------------------------------------

def _sup_quad(grid_mat, fields) -> float:
    vals = np.einsum("ni,ni->n", fields, (grid_mat @ fields.T).T)
    return float(np.max(vals))


def _time_quad(grid_mat, fields, tau) -> float:
    vals = np.einsum("ni,ni->n", fields, (grid_mat @ fields.T).T)
    return float(tau * (time_weights(fields.shape[0] - 1) @ vals))


def u_norm(traj: WaveTrajectory) -> float:
    """Discrete solution-space norm: sup-in-time H1 norms of u and u_t plus
    the L2-in-time L2 norm of the reconstructed u_tt."""
    g = traj.grid
    return float(np.sqrt(_sup_quad(g.h1_matrix, traj.u)
                         + _sup_quad(g.h1_matrix, traj.v)
                         + _time_quad(g.mass, traj.a, traj.tau)))


def x_norm(traj: WaveTrajectory) -> float:
    """Lower-order norm: sup-in-time H1 of u plus L2-in-time H1 of u_t."""
    g = traj.grid
    return float(np.sqrt(_sup_quad(g.h1_matrix, traj.u)
                         + _time_quad(g.h1_matrix, traj.v, traj.tau)))


def energy_identity_residual(traj: WaveTrajectory, coeffs, alpha: AlphaCoefficient,
                             src: SourceSpec) -> np.ndarray:
    """Per-step residual of the discrete energy identity obtained by testing
    with u_t: d/dt[ (1/2)||sqrt(alpha) u_t||^2 + (1/2)||c grad u||^2 ]
    + ||sqrt(b) grad u_t||^2 - (1/2 alpha_t u_t + 2 k u_t^2 + f, u_t)
    - <g, u_t> = 0.  Time derivatives are centered; the quadratic source is
    the semilinear one (for k = 0 this is the linear identity).  Returned
    for steps 1..n_steps-1; diagnostics only.
    """
    grid, tau, n = traj.grid, traj.tau, traj.n_steps
    k_csq = assemble_weighted_stiffness(grid, coeffs.csq)
    k_b = assemble_weighted_stiffness(grid, coeffs.b)
    mass1 = grid.mass

    def mass_energy(m, t):
        if alpha.spatially_uniform:
            return 0.5 * alpha.value(grid, t) * (traj.v[m] @ (mass1 @ traj.v[m]))
        m_a = assemble_weighted_mass(grid, alpha.value(grid, t))
        return 0.5 * (traj.v[m] @ (m_a @ traj.v[m]))

    energy = np.array([mass_energy(m, m * tau)
                       + 0.5 * (traj.u[m] @ (k_csq @ traj.u[m]))
                       for m in range(n + 1)])
    res = np.empty(n - 1)
    for m in range(1, n):
        vm = traj.v[m]
        src_nodal = 2.0 * coeffs.k * vm * vm
        fv = src.volumetric(grid, m, tau)
        if fv is not None:
            src_nodal = src_nodal + fv
        power = vm @ (mass1 @ src_nodal)
        bl = src.boundary_load(grid, m)
        if bl is not None:
            power += vm @ bl
        at = alpha.dt(grid, m * tau)
        if alpha.spatially_uniform:
            power += 0.5 * at * (vm @ (mass1 @ vm))
        else:
            power += 0.5 * (vm @ (assemble_weighted_mass(grid, at) @ vm))
        dissip = vm @ (k_b @ vm)
        res[m - 1] = (energy[m + 1] - energy[m - 1]) / (2.0 * tau) + dissip - power
    return res
