"""Phase-field description of the lens/fluid layout.

The nodal design variable phi lives in [0, 1] (1 = fluid, 0 = lens) and
the material fields are linear in phi,

    c^2 = c_l^2 + phi (c_f^2 - c_l^2),   b, k analogous,

with a flat (clamped) extension outside [0, 1] so intermediate iterates
never produce out-of-range coefficients.  Interface cost is the
Ginzburg-Landau energy with the double-obstacle potential
Psi0(phi) = phi (1 - phi) / 2 on [0, 1]; the +inf branches of the obstacle
are realized by the box constraint and `project_box`, never by a penalty.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePhaseFieldError
from .grid import Grid

# slack for feasibility checks: projection produces exact bounds, finite
# difference probes may overshoot by rounding only
_BOX_SLACK = 1e-12


@dataclass(frozen=True)
class MediumParams:
    """Lens/fluid material constants: speed of sound c [m/s], sound
    diffusivity b [m^2/s], dimensionless nonlinearity coefficient k."""

    c_lens: float
    c_fluid: float
    b_lens: float
    b_fluid: float
    k_lens: float
    k_fluid: float

    def __post_init__(self):
        if not (self.c_lens > 0 and self.c_fluid > 0 and self.b_lens > 0 and self.b_fluid > 0):
            raise ValueError("speeds and diffusivities must be positive")
        if not self.c_lens < self.c_fluid:
            raise ValueError("need c_lens < c_fluid")
        if not self.b_lens < self.b_fluid:
            raise ValueError("need b_lens < b_fluid")
        if not self.k_lens < self.k_fluid:
            raise ValueError("need k_lens < k_fluid")


@dataclass(frozen=True)
class GLParams:
    """Interface width eps and objective weight gamma, both > 0."""

    eps: float
    gamma: float

    def __post_init__(self):
        if not (self.eps > 0 and self.gamma > 0):
            raise ValueError("eps and gamma must be positive")


@dataclass
class CoefficientFields:
    """Nodal c^2, b, k obtained from a phase field."""

    csq: np.ndarray
    b: np.ndarray
    k: np.ndarray


def interpolate_coefficients(phi, mp: MediumParams) -> CoefficientFields:
    """Material fields at the nodes; phi outside [0,1] is clamped first."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("phase field contains non-finite entries")
    s = np.clip(phi, 0.0, 1.0)
    csq = mp.c_lens**2 + s * (mp.c_fluid**2 - mp.c_lens**2)
    b = mp.b_lens + s * (mp.b_fluid - mp.b_lens)
    k = mp.k_lens + s * (mp.k_fluid - mp.k_lens)
    return CoefficientFields(csq=csq, b=b, k=k)


def coefficient_derivatives(phi, mp: MediumParams):
    """Nodal ( (c^2)', b', k' ) w.r.t. phi; zero where the clamped
    extension is flat (phi outside [0, 1])."""
    phi = np.asarray(phi, dtype=float)
    inside = ((phi >= 0.0) & (phi <= 1.0)).astype(float)
    dcsq = (mp.c_fluid**2 - mp.c_lens**2) * inside
    db = (mp.b_fluid - mp.b_lens) * inside
    dk = (mp.k_fluid - mp.k_lens) * inside
    return dcsq, db, dk


def require_feasible(phi):
    phi = np.asarray(phi, dtype=float)
    if phi.min() < -_BOX_SLACK or phi.max() > 1.0 + _BOX_SLACK:
        raise InfeasiblePhaseFieldError(
            f"infeasible phase field: range [{phi.min():.3g}, {phi.max():.3g}]")
    return np.clip(phi, 0.0, 1.0)


def gl_energy(grid: Grid, phi, glp: GLParams, lumped: bool = False) -> float:
    """Ginzburg-Landau energy (eps/2)|grad phi|^2 + Psi0(phi)/eps, integrated.

    The potential term integrates Psi0 of the bilinear interpolant exactly
    (E_pot = (1/eps)(1'M phi - phi'M phi)/2), which makes `gl_gradient` its
    exact discrete gradient.  With lumped=True both use the lumped-mass
    quadrature instead; the two differ by O(h^2).
    """
    phi = require_feasible(phi)
    grad_part = 0.5 * glp.eps * (phi @ (grid.stiffness @ phi))
    if lumped:
        pot = grid.lumped_mass @ (0.5 * phi * (1.0 - phi))
    else:
        mphi = grid.mass @ phi
        pot = 0.5 * (np.sum(mphi) - phi @ mphi)
    return max(float(grad_part + pot / glp.eps), 0.0)


def gl_gradient(grid: Grid, phi, glp: GLParams, lumped: bool = False) -> np.ndarray:
    """Load vector G with <G, h> = gamma*eps (grad phi, grad h)
    + (gamma/eps) (Psi0'(phi), h), Psi0'(phi) = 1/2 - phi."""
    phi = require_feasible(phi)
    g = glp.gamma * glp.eps * (grid.stiffness @ phi)
    if lumped:
        g += (glp.gamma / glp.eps) * grid.lumped_mass * (0.5 - phi)
    else:
        g += (glp.gamma / glp.eps) * (grid.mass @ (0.5 - phi))
    return g


def project_box(field) -> np.ndarray:
    """Pointwise projection onto the admissible box [0, 1]."""
    field = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(field)):
        raise ValueError("cannot project non-finite field")
    return np.clip(field, 0.0, 1.0)
