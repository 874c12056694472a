"""Coefficient interpolation, clamped extension, Ginzburg-Landau energy.

Frozen oracles:
- E(phi = x ramp on unit square, eps=1) = 1/2 + int_0^1 x(1-x)/2 dx = 7/12,
  exact here because the quadrature integrates the interpolant's potential
  exactly
- Psi0(1/2) = 1/8
"""

import numpy as np
import pytest

from lensopt.errors import InfeasiblePhaseFieldError
from lensopt.grid import build_grid, norm_l2
from lensopt.medium import (GLParams, MediumParams, coefficient_derivatives,
                            gl_energy, gl_gradient, interpolate_coefficients,
                            project_box)

MP = MediumParams(c_lens=1.0, c_fluid=2.0, b_lens=0.005, b_fluid=0.01,
                  k_lens=0.5, k_fluid=1.5)


class TestMediumParams:
    def test_rejects_wrong_ordering(self):
        with pytest.raises(ValueError):
            MediumParams(2.0, 1.0, 0.005, 0.01, 0.5, 1.5)
        with pytest.raises(ValueError):
            MediumParams(1.0, 2.0, 0.01, 0.005, 0.5, 1.5)
        with pytest.raises(ValueError):
            MediumParams(1.0, 2.0, 0.005, 0.01, 1.5, 0.5)

    def test_negative_k_allowed(self):
        MediumParams(1.0, 2.0, 0.005, 0.01, -1.5, -0.5)


class TestInterpolation:
    def test_pure_lens(self):
        c = interpolate_coefficients(np.zeros(9), MP)
        assert np.all(c.csq == 1.0) and np.all(c.b == 0.005) and np.all(c.k == 0.5)

    def test_pure_fluid(self):
        c = interpolate_coefficients(np.ones(9), MP)
        assert np.all(c.csq == 4.0)

    def test_clamps_above_one(self):
        c = interpolate_coefficients(np.array([1.3]), MP)
        assert c.csq[0] == 4.0

    def test_midpoint(self):
        c = interpolate_coefficients(np.array([0.5]), MP)
        assert c.csq[0] == pytest.approx(2.5)

    def test_bounds_for_arbitrary_fields(self, rng):
        phi = rng.uniform(-5.0, 5.0, 200)
        c = interpolate_coefficients(phi, MP)
        assert np.all((c.csq >= 1.0) & (c.csq <= 4.0))
        assert np.all((c.b >= 0.005) & (c.b <= 0.01))
        assert np.all((c.k >= 0.5) & (c.k <= 1.5))

    def test_monotone_in_phi(self, rng):
        phi = np.sort(rng.uniform(-1.0, 2.0, 50))
        c = interpolate_coefficients(phi, MP)
        assert np.all(np.diff(c.csq) >= 0.0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            interpolate_coefficients(np.array([np.nan]), MP)


class TestDerivatives:
    def test_interior_slope(self):
        dcsq, db, dk = coefficient_derivatives(np.array([0.5]), MP)
        assert dcsq[0] == pytest.approx(3.0)
        assert db[0] == pytest.approx(0.005)
        assert dk[0] == pytest.approx(1.0)

    def test_flat_extension(self):
        dcsq, _, _ = coefficient_derivatives(np.array([-0.2, 1.2]), MP)
        assert np.all(dcsq == 0.0)

    def test_central_difference_oracle(self, rng):
        phi = rng.uniform(0.2, 0.8, 40)
        h = rng.standard_normal(40)
        delta = 1e-6
        dcsq, db, dk = coefficient_derivatives(phi, MP)
        for attr, dfield in (("csq", dcsq), ("b", db), ("k", dk)):
            plus = getattr(interpolate_coefficients(phi + delta * h, MP), attr)
            minus = getattr(interpolate_coefficients(phi - delta * h, MP), attr)
            fd = (plus - minus) / (2.0 * delta)
            assert np.abs(fd - dfield * h).max() < 1e-8


class TestGLEnergy:
    def test_pure_phase_zero(self):
        g = build_grid(8, 8, 1.0, 1.0)
        glp = GLParams(eps=0.5, gamma=1.0)
        assert gl_energy(g, np.zeros(g.n_nodes), glp) == 0.0
        assert gl_energy(g, np.ones(g.n_nodes), glp) == 0.0

    def test_half_field(self):
        g = build_grid(8, 8, 1.0, 1.0)
        e = gl_energy(g, 0.5 * np.ones(g.n_nodes), GLParams(eps=1.0, gamma=1.0))
        assert e == pytest.approx(0.125, rel=1e-12)

    def test_ramp_value(self):
        g = build_grid(16, 16, 1.0, 1.0)
        e = gl_energy(g, g.node_xy[:, 0], GLParams(eps=1.0, gamma=1.0))
        assert e == pytest.approx(7.0 / 12.0, abs=1e-12)

    def test_positive_for_mixtures(self, rng):
        g = build_grid(8, 8, 1.0, 1.0)
        phi = rng.uniform(0.05, 0.95, g.n_nodes)
        assert gl_energy(g, phi, GLParams(eps=0.3, gamma=1.0)) > 0.0

    def test_infeasible_raises(self):
        g = build_grid(4, 4, 1.0, 1.0)
        phi = np.full(g.n_nodes, 0.5)
        phi[3] = 1.2
        with pytest.raises(InfeasiblePhaseFieldError):
            gl_energy(g, phi, GLParams(eps=1.0, gamma=1.0))

    def test_lumped_variant_close(self, rng):
        g = build_grid(24, 24, 1.0, 1.0)
        phi = 0.5 + 0.4 * np.sin(np.pi * g.node_xy[:, 0])
        glp = GLParams(eps=0.5, gamma=1.0)
        consistent = gl_energy(g, phi, glp)
        lumped = gl_energy(g, phi, glp, lumped=True)
        assert lumped == pytest.approx(consistent, rel=5e-3)


class TestGLGradient:
    def test_flat_interior_point(self):
        g = build_grid(8, 8, 1.0, 1.0)
        grad = gl_gradient(g, 0.5 * np.ones(g.n_nodes), GLParams(eps=1.0, gamma=1.0))
        assert np.abs(grad).max() < 1e-14

    def test_zero_field_pairing(self, rng):
        # <G, h> = int h / 2 at phi = 0, gamma = eps = 1
        g = build_grid(6, 6, 1.0, 1.0)
        grad = gl_gradient(g, np.zeros(g.n_nodes), GLParams(eps=1.0, gamma=1.0))
        h = rng.standard_normal(g.n_nodes)
        expected = 0.5 * np.sum(g.mass @ h)
        assert grad @ h == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("lumped", [False, True])
    def test_exact_dual_of_energy(self, rng, lumped):
        g = build_grid(12, 12, 1.0, 1.0)
        glp = GLParams(eps=0.3, gamma=2.0)
        phi = rng.uniform(0.2, 0.8, g.n_nodes)
        h = rng.standard_normal(g.n_nodes)
        delta = 1e-5
        fd = (glp.gamma * gl_energy(g, phi + delta * h, glp, lumped=lumped)
              - glp.gamma * gl_energy(g, phi - delta * h, glp, lumped=lumped)) / (2 * delta)
        pairing = gl_gradient(g, phi, glp, lumped=lumped) @ h
        assert fd == pytest.approx(pairing, rel=1e-6)


class TestProjection:
    def test_clamps(self):
        out = project_box(np.array([1.7, -0.3, 0.4]))
        assert np.array_equal(out, [1.0, 0.0, 0.4])

    def test_idempotent(self, rng):
        z = rng.uniform(-2.0, 3.0, 100)
        once = project_box(z)
        assert np.array_equal(project_box(once), once)

    def test_nonexpansive(self, rng):
        g = build_grid(6, 6, 1.0, 1.0)
        for _ in range(20):
            a = rng.uniform(-2.0, 3.0, g.n_nodes)
            b = rng.uniform(-2.0, 3.0, g.n_nodes)
            assert norm_l2(g, project_box(a) - project_box(b)) \
                <= norm_l2(g, a - b) + 1e-14

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            project_box(np.array([np.nan]))
