"""Time stepping: manufactured-solution accuracy, Picard fixed point, norms,
and the discrete energy identity.

The manufactured solution u*(x,t) = cos(pi x) cos(pi y) sin(t) has zero
Neumann data on the unit square; the matching volume source for the linear
problem (k = 0, alpha = 1, constant c^2 = cc, b = bb) is

    f = cos(pi x) cos(pi y) [ (2 pi^2 cc - 1) sin(t) + 2 pi^2 bb cos(t) ],

checked independently against sympy in test_mms_source_oracle.
"""

import numpy as np
import pytest

from lensopt.errors import PicardDivergenceError
from lensopt.grid import build_grid
from lensopt.medium import CoefficientFields, MediumParams, interpolate_coefficients
from lensopt.wave import (AlphaCoefficient, SourceSpec, WaveTrajectory,
                          energy_identity_residual, reconstruct_derivatives,
                          solve_linearized, solve_state, u_norm, x_norm)

CC, BB = 2.0, 0.05
MP = MediumParams(c_lens=1.0, c_fluid=2.0, b_lens=0.005, b_fluid=0.01,
                  k_lens=0.5, k_fluid=1.5)


def exact(x, y, t):
    return np.cos(np.pi * x) * np.cos(np.pi * y) * np.sin(t)


def mms_source(x, y, t):
    return np.cos(np.pi * x) * np.cos(np.pi * y) * (
        (2.0 * np.pi**2 * CC - 1.0) * np.sin(t) + 2.0 * np.pi**2 * BB * np.cos(t))


def const_coeffs(grid, cc=CC, bb=BB, kk=0.0):
    ones = np.ones(grid.n_nodes)
    return CoefficientFields(csq=cc * ones, b=bb * ones, k=kk * ones)


def mms_solve(nx, n_steps, t_final=1.0):
    grid = build_grid(nx, nx, 1.0, 1.0)
    tau = t_final / n_steps
    x, y = grid.node_xy[:, 0], grid.node_xy[:, 1]
    src = SourceSpec(u0=exact(x, y, 0.0), u1=np.cos(np.pi * x) * np.cos(np.pi * y),
                     f=mms_source)
    traj = solve_linearized(grid, const_coeffs(grid), AlphaCoefficient.constant(),
                            None, src, tau, n_steps)
    return grid, traj


def mms_error(grid, traj):
    x, y = grid.node_xy[:, 0], grid.node_xy[:, 1]
    m = grid.mass
    err = 0.0
    for n in range(traj.n_steps + 1):
        d = traj.u[n] - exact(x, y, n * traj.tau)
        err = max(err, float(np.sqrt(d @ (m @ d))))
    return err


def left_pulse_source(grid, n_steps, t_final=1.0, amplitude=0.2, freq=3.0):
    edge = grid.edge_nodes("left")
    yy = grid.node_xy[edge, 1]
    shape_fn = np.exp(-((yy - 0.5 * grid.ly) / 0.2) ** 2)
    t = np.linspace(0.0, t_final, n_steps + 1)
    ramp = np.sin(0.5 * np.pi * np.minimum(t / 0.5, 1.0)) ** 2
    profile = amplitude * np.sin(2 * np.pi * freq * t) * ramp
    return SourceSpec(u0=np.zeros(grid.n_nodes), u1=np.zeros(grid.n_nodes),
                      g_edges={"left": profile[:, None] * shape_fn[None, :]})


class TestMMSSourceOracle:
    def test_sympy_substitution(self):
        sp = pytest.importorskip("sympy")
        x, y, t = sp.symbols("x y t")
        u = sp.cos(sp.pi * x) * sp.cos(sp.pi * y) * sp.sin(t)
        f = (sp.diff(u, t, 2) - CC * (sp.diff(u, x, 2) + sp.diff(u, y, 2))
             - BB * sp.diff(sp.diff(u, x, 2) + sp.diff(u, y, 2), t))
        probe = {x: 0.3, y: 0.7, t: 0.45}
        assert float(f.subs(probe)) == pytest.approx(
            mms_source(0.3, 0.7, 0.45), rel=1e-12)
        # Neumann data vanishes on all four edges of the unit square
        for edge_probe in ({x: 0}, {x: 1}, {y: 0}, {y: 1}):
            du = sp.diff(u, x) if "x" in str(edge_probe) else sp.diff(u, y)
            assert sp.simplify(du.subs(edge_probe)) == 0


class TestLinearized:
    def test_zero_data_exact_zero(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        src = SourceSpec.zero(grid)
        traj = solve_linearized(grid, const_coeffs(grid),
                                AlphaCoefficient.constant(), None, src,
                                0.05, 10)
        assert np.all(traj.u == 0.0) and np.all(traj.v == 0.0)

    def test_mms_two_level_order(self):
        e1 = mms_error(*mms_solve(12, 24))
        e2 = mms_error(*mms_solve(24, 48))
        assert np.log2(e1 / e2) > 1.8

    def test_symmetric_pulse_symmetric_solution(self):
        grid = build_grid(12, 12, 1.0, 1.0)
        n_steps = 24
        t = np.linspace(0.0, 1.0, n_steps + 1)
        profile = 0.1 * np.sin(2 * np.pi * t)
        g_edges = {e: np.tile(profile[:, None], (1, 13))
                   for e in ("left", "right", "top", "bottom")}
        src = SourceSpec(u0=np.zeros(grid.n_nodes), u1=np.zeros(grid.n_nodes),
                         g_edges=g_edges)
        traj = solve_linearized(grid, const_coeffs(grid),
                                AlphaCoefficient.constant(), None, src,
                                1.0 / n_steps, n_steps)
        field = traj.u[-1].reshape(13, 13)
        assert np.abs(field - field[:, ::-1]).max() < 1e-10
        assert np.abs(field - field[::-1, :]).max() < 1e-10
        assert np.abs(field - field.T).max() < 1e-10

    def test_superposition_when_linear(self, rng):
        grid = build_grid(10, 10, 1.0, 1.0)
        n_steps = 16
        tau = 1.0 / n_steps
        coeffs = const_coeffs(grid)
        alpha = AlphaCoefficient.constant()
        src_a = left_pulse_source(grid, n_steps)
        u0b = 0.05 * np.sin(np.pi * grid.node_xy[:, 0])
        src_b = SourceSpec(u0=u0b, u1=np.zeros(grid.n_nodes))
        src_ab = SourceSpec(u0=u0b, u1=np.zeros(grid.n_nodes),
                            g_edges=src_a.g_edges)
        ta = solve_linearized(grid, coeffs, alpha, None, src_a, tau, n_steps)
        tb = solve_linearized(grid, coeffs, alpha, None, src_b, tau, n_steps)
        tab = solve_linearized(grid, coeffs, alpha, None, src_ab, tau, n_steps)
        scale = np.abs(tab.u).max()
        assert np.abs(tab.u - ta.u - tb.u).max() < 1e-10 * scale


class TestSolveState:
    def test_zero_data_one_sweep(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        traj, report = solve_state(grid, np.ones(grid.n_nodes), MP,
                                   AlphaCoefficient.constant(),
                                   SourceSpec.zero(grid), 0.05, 10)
        assert report.sweeps == 1 and report.converged
        assert np.all(traj.u == 0.0)

    def test_k_zero_two_sweeps_matches_linear(self):
        grid = build_grid(12, 12, 1.0, 1.0)
        n_steps = 16
        tau = 1.0 / n_steps
        mp0 = MediumParams(c_lens=1.0, c_fluid=2.0, b_lens=0.005, b_fluid=0.01,
                           k_lens=-1e-300, k_fluid=1e-300)
        src = left_pulse_source(grid, n_steps)
        phi = np.full(grid.n_nodes, 0.5)
        traj, report = solve_state(grid, phi, mp0, AlphaCoefficient.constant(),
                                   src, tau, n_steps)
        assert report.sweeps == 2
        ref = solve_linearized(grid, interpolate_coefficients(phi, mp0),
                               AlphaCoefficient.constant(), None, src, tau,
                               n_steps)
        assert np.abs(traj.u - ref.u).max() < 1e-12

    def test_small_pulse_contracts(self):
        grid = build_grid(16, 16, 1.0, 1.0)
        n_steps = 32
        src = left_pulse_source(grid, n_steps, amplitude=0.3, freq=3.0)
        traj, report = solve_state(grid, np.full(grid.n_nodes, 0.7), MP,
                                   AlphaCoefficient.constant(), src,
                                   1.0 / n_steps, n_steps, picard_tol=1e-10)
        assert report.converged
        assert all(r < 1.0 for r in report.ratios)

    def test_divergence_detected(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        n_steps = 16
        mp_hot = MediumParams(c_lens=1.0, c_fluid=2.0, b_lens=0.005,
                              b_fluid=0.01, k_lens=20.0, k_fluid=60.0)
        src = left_pulse_source(grid, n_steps, amplitude=3.0)
        with pytest.raises(PicardDivergenceError):
            solve_state(grid, np.ones(grid.n_nodes), mp_hot,
                        AlphaCoefficient.constant(), src, 1.0 / n_steps,
                        n_steps, picard_max=30)

    def test_picard_tol_domain(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            solve_state(grid, np.ones(grid.n_nodes), MP,
                        AlphaCoefficient.constant(), SourceSpec.zero(grid),
                        0.05, 10, picard_tol=1e-3)

    def test_half_amplitude_near_linear(self):
        grid = build_grid(16, 16, 1.0, 1.0)
        n_steps = 32
        tau = 1.0 / n_steps
        phi = np.full(grid.n_nodes, 0.8)
        alpha = AlphaCoefficient.constant()
        full, rep = solve_state(grid, phi, MP, alpha,
                                left_pulse_source(grid, n_steps, amplitude=0.2),
                                tau, n_steps)
        half, _ = solve_state(grid, phi, MP, alpha,
                              left_pulse_source(grid, n_steps, amplitude=0.1),
                              tau, n_steps)
        assert max(rep.ratios) < 0.1
        ratio = u_norm(half) / u_norm(full)
        assert abs(ratio - 0.5) < 0.1


class TestNorms:
    def _const_traj(self, grid, value, n_steps=8, tau=0.1):
        shape = (n_steps + 1, grid.n_nodes)
        return WaveTrajectory(grid=grid, tau=tau, u=np.full(shape, value),
                              v=np.zeros(shape), a=np.zeros(shape))

    def test_zero(self):
        grid = build_grid(6, 6, 1.0, 1.0)
        traj = self._const_traj(grid, 0.0)
        assert u_norm(traj) == 0.0 and x_norm(traj) == 0.0

    def test_constant_value(self):
        grid = build_grid(6, 6, 2.0, 0.5)
        traj = self._const_traj(grid, 3.0)
        assert u_norm(traj) == pytest.approx(3.0 * np.sqrt(1.0), rel=1e-12)

    def test_homogeneous(self, rng):
        grid = build_grid(6, 6, 1.0, 1.0)
        shape = (9, grid.n_nodes)
        traj = WaveTrajectory(grid=grid, tau=0.1,
                              u=rng.standard_normal(shape),
                              v=rng.standard_normal(shape),
                              a=rng.standard_normal(shape))
        assert u_norm(traj.scaled(3.0)) == pytest.approx(3.0 * u_norm(traj))
        assert x_norm(traj.scaled(3.0)) == pytest.approx(3.0 * x_norm(traj))

    def test_x_bounded_by_u(self, rng):
        grid = build_grid(6, 6, 1.0, 1.0)
        t_final = 0.8
        n_steps = 8
        bound = max(1.0, np.sqrt(t_final)) * 1.05
        for _ in range(10):
            shape = (n_steps + 1, grid.n_nodes)
            traj = WaveTrajectory(grid=grid, tau=t_final / n_steps,
                                  u=rng.standard_normal(shape),
                                  v=rng.standard_normal(shape),
                                  a=np.zeros(shape))
            assert x_norm(traj) <= bound * u_norm(traj) + 1e-12

    def test_velocity_reconstruction_consistency(self):
        grid, traj = mms_solve(8, 12)
        inner = (traj.u[2:] - traj.u[:-2]) / (2.0 * traj.tau)
        assert np.abs(traj.v[1:-1] - inner).max() < 1e-14


class TestEnergyIdentity:
    def test_zero_trajectory(self):
        grid = build_grid(8, 8, 1.0, 1.0)
        shape = (11, grid.n_nodes)
        traj = WaveTrajectory(grid=grid, tau=0.05, u=np.zeros(shape),
                              v=np.zeros(shape), a=np.zeros(shape))
        res = energy_identity_residual(traj, const_coeffs(grid),
                                       AlphaCoefficient.constant(),
                                       SourceSpec.zero(grid))
        assert np.all(res == 0.0)

    def test_refinement_reduces_residual(self):
        grid1, t1 = mms_solve(12, 24)
        grid2, t2 = mms_solve(24, 48)
        x, y = grid1.node_xy[:, 0], grid1.node_xy[:, 1]
        src1 = SourceSpec(u0=exact(x, y, 0.0),
                          u1=np.cos(np.pi * x) * np.cos(np.pi * y), f=mms_source)
        x2, y2 = grid2.node_xy[:, 0], grid2.node_xy[:, 1]
        src2 = SourceSpec(u0=exact(x2, y2, 0.0),
                          u1=np.cos(np.pi * x2) * np.cos(np.pi * y2), f=mms_source)
        r1 = np.abs(energy_identity_residual(
            t1, const_coeffs(grid1), AlphaCoefficient.constant(), src1)).max()
        r2 = np.abs(energy_identity_residual(
            t2, const_coeffs(grid2), AlphaCoefficient.constant(), src2)).max()
        assert r2 < r1 / 2.0  # observed order >= 1

    def test_dissipation_grows_with_b(self):
        grid = build_grid(12, 12, 1.0, 1.0)
        n_steps = 24
        tau = 1.0 / n_steps
        src = left_pulse_source(grid, n_steps)
        alpha = AlphaCoefficient.constant()
        k_b_small = const_coeffs(grid, bb=0.01)
        k_b_large = const_coeffs(grid, bb=0.1)
        t_small = solve_linearized(grid, k_b_small, alpha, None, src, tau, n_steps)
        t_large = solve_linearized(grid, k_b_large, alpha, None, src, tau, n_steps)

        def dissipation(traj, coeffs):
            from lensopt.grid import assemble_weighted_stiffness
            k_b = assemble_weighted_stiffness(grid, coeffs.b)
            return sum(traj.v[n] @ (k_b @ traj.v[n]) for n in range(traj.n_steps + 1))

        assert dissipation(t_large, k_b_large) > dissipation(t_small, k_b_small)
        res = energy_identity_residual(t_large, k_b_large, alpha, src)
        assert np.abs(res).max() < 1.0  # stays at discretization size


class TestStabilityEcho:
    def test_difference_quotient_bounded(self, rng):
        grid = build_grid(12, 12, 1.0, 1.0)
        n_steps = 24
        tau = 1.0 / n_steps
        src = left_pulse_source(grid, n_steps)
        alpha = AlphaCoefficient.constant()
        x, y = grid.node_xy[:, 0], grid.node_xy[:, 1]
        phi = 0.5 + 0.2 * np.sin(np.pi * x) * np.sin(np.pi * y)
        h = np.sin(2 * np.pi * x) * np.sin(np.pi * y)
        h /= np.abs(h).max()
        base, _ = solve_state(grid, phi, MP, alpha, src, tau, n_steps)
        quotients = []
        for s in (1e-1, 1e-2):
            pert, _ = solve_state(grid, phi + s * h, MP, alpha, src, tau, n_steps)
            quotients.append(x_norm(pert.subtract(base)) / s)
        assert max(quotients) < 2.0 * min(quotients)


class TestReconstruction:
    def test_needs_three_steps(self):
        with pytest.raises(ValueError):
            reconstruct_derivatives(0.1, np.zeros((3, 5)), np.zeros(5))

    def test_quadratic_exact(self):
        # u(t) = t^2 has exact centered/one-sided second-order reconstructions
        tau = 0.1
        t = tau * np.arange(7)
        u = np.tile((t ** 2)[:, None], (1, 4))
        v, a = reconstruct_derivatives(tau, u, np.zeros(4))
        assert np.abs(v[1:] - 2.0 * t[1:, None]).max() < 1e-12
        assert np.abs(a - 2.0).max() < 1e-10
