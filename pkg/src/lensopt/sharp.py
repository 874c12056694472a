"""Sharp-interface tooling: thresholding, perimeter estimation, the sharp
objective, the 1D optimal-profile constant, and the interface-width sweep.

The sharp objective weights the perimeter with the potential-dependent
constant C0 = integral_0^1 sqrt(2 Psi0(s)) ds = pi/8 for the double
obstacle; `optimal_profile_energy` recovers that constant numerically by
minimizing the 1D interface energy over monotone 0 -> 1 transitions.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LensoptError
from .grid import Grid
from .gradient import objective_from_state, tracking_misfit
from .medium import gl_energy
from .optimizer import optimize

# 1D transition cost of the double-obstacle potential: int_0^1 sqrt(2 Psi0) ds
PROFILE_CONSTANT = math.pi / 8.0


def threshold(phi, level: float = 0.5) -> np.ndarray:
    """Nodewise indicator phi >= level (ties go to the fluid side)."""
    if not 0.0 < level < 1.0:
        raise ValueError("threshold level must lie in (0, 1)")
    return (np.asarray(phi, dtype=float) >= level).astype(float)


def _require_binary(bin_field) -> np.ndarray:
    bin_field = np.asarray(bin_field, dtype=float)
    if not np.all((bin_field == 0.0) | (bin_field == 1.0)):
        raise ValueError("field is not binary; threshold it first")
    return bin_field


def _midedge_length(grid: Grid, b: np.ndarray) -> float:
    """Mid-edge level-set length of a binary field: per mixed cell, the
    Manhattan crossing length is replaced by the straight mid-edge segment
    (diagonal corner cuts), the sqrt-metric correction of the raw
    edge-crossing TV."""
    c = b[grid.conn].astype(int)  # corners (bl, br, tr, tl) per cell
    code = c[:, 0] + 2 * c[:, 1] + 4 * c[:, 2] + 8 * c[:, 3]
    hx, hy = grid.hx, grid.hy
    diag = 0.5 * math.hypot(hx, hy)
    lut = np.zeros(16)
    for single in (1, 2, 4, 8):
        lut[single] = lut[15 - single] = diag
    lut[1 + 2] = lut[15 - 3] = hx     # bottom row vs top row
    lut[2 + 4] = lut[15 - 6] = hy     # right column vs left column
    lut[1 + 4] = lut[2 + 8] = 2.0 * diag  # checkerboard saddles
    return float(lut[code].sum())


def _isoline_length(grid: Grid, f: np.ndarray, level: float = 0.5) -> float:
    """Length of the `level` isoline of a nodal field, with crossing points
    linearly interpolated along cell edges (marching squares; saddles split
    by the cell-average rule)."""
    v = f.reshape(grid.ny + 1, grid.nx + 1) - level
    bl = v[:-1, :-1].ravel()
    br = v[:-1, 1:].ravel()
    tr = v[1:, 1:].ravel()
    tl = v[1:, :-1].ravel()
    hx, hy = grid.hx, grid.hy

    def cross(a, b):
        # interpolated crossing fraction on an edge from value a to value b
        with np.errstate(divide="ignore", invalid="ignore"):
            t = a / (a - b)
        return t

    pos = [c > 0.0 for c in (bl, br, tr, tl)]
    code = (pos[0].astype(int) + 2 * pos[1].astype(int)
            + 4 * pos[2].astype(int) + 8 * pos[3].astype(int))
    # crossing coordinates (local cell units) on the four edges
    xb, yb = cross(bl, br) * hx, np.zeros_like(bl)          # bottom
    xr, yr = np.full_like(bl, hx), cross(br, tr) * hy       # right
    xt, yt = cross(tl, tr) * hx, np.full_like(bl, hy)       # top
    xl, yl = np.zeros_like(bl), cross(bl, tl) * hy          # left

    def seg(x0, y0, x1, y1, mask):
        # crossings on unused edges are nan; they are masked out here
        with np.errstate(invalid="ignore"):
            d = np.hypot(x1 - x0, y1 - y0)
        return float(np.sum(d[mask]))

    total = 0.0
    total += seg(xl, yl, xb, yb, (code == 1) | (code == 14))    # bl corner
    total += seg(xb, yb, xr, yr, (code == 2) | (code == 13))    # br corner
    total += seg(xr, yr, xt, yt, (code == 4) | (code == 11))    # tr corner
    total += seg(xt, yt, xl, yl, (code == 8) | (code == 7))     # tl corner
    total += seg(xl, yl, xr, yr, (code == 3) | (code == 12))    # horizontal
    total += seg(xb, yb, xt, yt, (code == 6) | (code == 9))     # vertical
    # saddles: connect so the phase of the cell average stays connected
    avg = 0.25 * (bl + br + tr + tl)
    for sad, pos_corners_cut, neg_corners_cut in (
            # (code, segments cutting the positive corners, ... negative corners)
            (5, ((xl, yl, xb, yb), (xr, yr, xt, yt)),
                ((xb, yb, xr, yr), (xt, yt, xl, yl))),
            (10, ((xb, yb, xr, yr), (xt, yt, xl, yl)),
                 ((xl, yl, xb, yb), (xr, yr, xt, yt)))):
        mask = code == sad
        if not np.any(mask):
            continue
        pos_conn = mask & (avg > 0.0)   # positive phase connected: cut negatives
        neg_conn = mask & ~(avg > 0.0)  # negative phase connected: cut positives
        for x0, y0, x1, y1 in neg_corners_cut:
            total += seg(x0, y0, x1, y1, pos_conn)
        for x0, y0, x1, y1 in pos_corners_cut:
            total += seg(x0, y0, x1, y1, neg_conn)
    return total


def _blur_nodal(grid: Grid, b: np.ndarray) -> np.ndarray:
    """One separable [1,2,1]/4 smoothing pass with replicated borders."""
    f = b.reshape(grid.ny + 1, grid.nx + 1)
    p = np.pad(f, 1, mode="edge")
    f = 0.25 * (p[1:-1, :-2] + 2.0 * p[1:-1, 1:-1] + p[1:-1, 2:])
    p = np.pad(f, 1, mode="edge")
    f = 0.25 * (p[:-2, 1:-1] + 2.0 * p[1:-1, 1:-1] + p[2:, 1:-1])
    return f.ravel()


def perimeter_tv(grid: Grid, bin_field, smoothing: int = 1) -> float:
    """Interface length of a binary nodal indicator.

    The raw edge-crossing total variation (Manhattan length) is corrected
    in two stages: mixed cells always contribute the sqrt-metric mid-edge
    segment instead of two half-edges, and with smoothing >= 1 (default)
    the indicator is first smeared by [1,2,1]/4 passes so that interpolated
    crossing points recover sub-cell interface orientation.  Straight
    axis-aligned interfaces are measured exactly either way; the raw
    mid-edge variant (smoothing=0) overestimates isotropically oriented
    smooth curves by about 5% asymptotically, the smoothed default brings a
    disk at 256^2 to well under 2%.  Invariant under the 0 <-> 1 swap and
    under translation.
    """
    b = _require_binary(bin_field)
    if smoothing <= 0:
        return _midedge_length(grid, b)
    f = b
    for _ in range(smoothing):
        f = _blur_nodal(grid, f)
    return _isoline_length(grid, f)


def sharp_objective(bin_field, scenario) -> float:
    """Tracking misfit at the binary layout plus gamma * C0 * perimeter.

    Uses exactly the same state solver as the diffuse objective (binary
    fields are admissible coefficients)."""
    b = _require_binary(bin_field)
    state, _ = scenario.solve_state(b)
    track = tracking_misfit(state, scenario.target(), scenario.m_d, scenario.tau)
    return track + scenario.glp.gamma * PROFILE_CONSTANT * perimeter_tv(scenario.grid, b)


def optimal_profile_energy(eps: float, n_nodes: int = 2000, length: float = 1.0,
                           max_iterations: int = 500, tol: float = 1e-8) -> float:
    """Minimum 1D interface energy over monotone 0 -> 1 transitions.

    Minimizes (eps/2)|phi'|^2 + Psi0(phi)/eps on [0, length] with pinned
    endpoints phi(0)=0, phi(length)=1 and the box constraint, by projected
    gradient preconditioned with (eps K + M/eps)^{-1}.  The minimum tends to
    the profile constant pi/8 as the mesh resolves eps, independently of
    eps itself (rescaling invariance of the transition cost).
    """
    if eps <= 0.0 or length <= 0.0:
        raise ValueError("eps and length must be positive")
    h = length / (n_nodes - 1)
    if h > eps / 20.0:
        raise ValueError(f"resolution too coarse: need >= 20 nodes per eps, "
                         f"got {eps / h:.1f}")
    # 1D linear elements
    main_k = np.full(n_nodes, 2.0 / h)
    main_k[0] = main_k[-1] = 1.0 / h
    k1 = sp.diags([np.full(n_nodes - 1, -1.0 / h), main_k,
                   np.full(n_nodes - 1, -1.0 / h)], offsets=(-1, 0, 1)).tocsc()
    main_m = np.full(n_nodes, 4.0 * h / 6.0)
    main_m[0] = main_m[-1] = 2.0 * h / 6.0
    m1 = sp.diags([np.full(n_nodes - 1, h / 6.0), main_m,
                   np.full(n_nodes - 1, h / 6.0)], offsets=(-1, 0, 1)).tocsc()

    def energy(p):
        pot = 0.5 * (np.sum(m1 @ p) - p @ (m1 @ p))
        return 0.5 * eps * (p @ (k1 @ p)) + pot / eps

    def grad(p):
        return eps * (k1 @ p) + (m1 @ (0.5 - p)) / eps

    bmat = (eps * k1 + m1 / eps).tocsr()
    bdiag = bmat.diagonal()
    x = np.linspace(0.0, length, n_nodes)
    mid = 0.5 * length
    phi = np.clip((x - mid) / (math.pi * eps) + 0.5, 0.0, 1.0)
    phi[0], phi[-1] = 0.0, 1.0

    def project(p):
        p = np.clip(p, 0.0, 1.0)
        p[0], p[-1] = 0.0, 1.0
        return p

    e_val = energy(phi)
    step = 1.0
    for _ in range(max_iterations):
        g = grad(phi)
        if float(np.max(np.abs(phi - project(phi - g)))) <= tol:
            return float(e_val)
        # precondition on the inactive set only, so the projected direction
        # stays a descent direction; active components move by diagonal scale
        active = ((phi <= 0.0) & (g > 0.0)) | ((phi >= 1.0) & (g < 0.0))
        active[0] = active[-1] = True
        free = ~active
        d = g / bdiag
        if np.any(free):
            b_ff = bmat[free][:, free].tocsc()
            d[free] = spla.splu(b_ff).solve(g[free])
        d[0] = d[-1] = 0.0
        s = step
        accepted = False
        for _ in range(60):
            trial = project(phi - s * d)
            pairing = float(g @ (phi - trial))
            if pairing > 0.0:
                e_trial = energy(trial)
                if e_trial <= e_val - 1e-4 * pairing:
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            return float(e_val)
        phi, e_val = trial, e_trial
        step = min(2.0 * s, 1.0)
    raise LensoptError("1D profile minimization did not converge")


@dataclass
class SweepRow:
    eps: float
    objective: float | None = None
    gl_energy: float | None = None
    sharp_perimeter_cost: float | None = None
    sharp_objective: float | None = None
    status: str = "ok"


@dataclass
class SweepResult:
    rows: list
    l1_diffs: list
    fields: list  # phase fields per successful eps, for inspection/output


def _l1_distance(grid: Grid, a, b) -> float:
    return float(grid.lumped_mass @ np.abs(a - b))


def rescale_profile(phi, eps_from: float, eps_to: float) -> np.ndarray:
    """Pointwise remap that turns the optimal transition profile of width
    eps_from into the one of width eps_to.

    Across a straight interface the minimizer is phi(s) = (1 + sin(s/eps))/2
    on |s| <= pi eps / 2 and constant outside, so composing with the value
    map below rescales the profile exactly; plateaus at 0 and 1 are fixed
    points.  Used to warm-start the next interface width in a sweep.
    """
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    ratio = eps_from / eps_to
    angle = np.clip(ratio * np.arcsin(2.0 * phi - 1.0), -0.5 * np.pi, 0.5 * np.pi)
    return 0.5 * (1.0 + np.sin(angle))


def eps_sweep(scenario, eps_list, cold_start: bool = False, jobs: int = 1,
              sigma_scale: float | None = None) -> SweepResult:
    """Optimize across decreasing interface widths and tabulate the diffuse
    vs sharp quantities: j_eps(phi_eps), E_eps(phi_eps), C0 P(threshold),
    j0(threshold), plus successive L1 differences of the minimizers.

    Warm-starts each eps from the previous minimizer by default, with the
    transition profile rescaled to the new width (small-eps landscapes are
    stiff; this selects a consistent branch of stationary points and hands
    each run a near-relaxed interface).  cold_start=True makes the runs
    independent, optionally in parallel over `jobs` processes.  With
    sigma_scale set, each run uses an H1-smoothed descent direction of
    length sigma_scale * eps.  Per-eps failures are recorded in the row
    status and the sweep continues.
    """
    eps_list = list(eps_list)
    for eps in eps_list:
        if eps < 4.0 * max(scenario.grid.hx, scenario.grid.hy):
            raise ValueError(f"eps={eps:g} not resolved by >= 4 grid cells")

    def configured(eps):
        scn = scenario.with_eps(eps)
        if sigma_scale is not None:
            scn.opt = replace(scn.opt, smoothing_sigma=sigma_scale * eps)
        return scn

    if cold_start and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_eps_worker,
                                 [(scenario.config, eps, sigma_scale)
                                  for eps in eps_list]))
    else:
        outs = []
        warm = None
        warm_eps = None
        for eps in eps_list:
            if cold_start or warm is None:
                start = scenario.phi0
            else:
                start = rescale_profile(warm, warm_eps, eps)
            outs.append(_run_one_eps(configured(eps), start))
            if not cold_start and outs[-1][1] is not None:
                warm, warm_eps = outs[-1][1], eps

    rows = [row for row, _ in outs]
    fields = [phi for _, phi in outs]
    l1 = [_l1_distance(scenario.grid, fields[i], fields[i + 1])
          for i in range(len(fields) - 1)
          if fields[i] is not None and fields[i + 1] is not None]
    return SweepResult(rows=rows, l1_diffs=l1, fields=fields)


def _run_one_eps(scn, phi_start):
    eps = scn.glp.eps
    try:
        result = optimize(phi_start, scn)
        phi = result.phi
        state, _ = scn.solve_state(phi)
        obj = objective_from_state(phi, state, scn)
        binf = threshold(phi)
        per_cost = scn.glp.gamma * PROFILE_CONSTANT * perimeter_tv(scn.grid, binf)
        row = SweepRow(eps=eps, objective=obj.total,
                       gl_energy=gl_energy(scn.grid, phi, scn.glp),
                       sharp_perimeter_cost=per_cost,
                       sharp_objective=sharp_objective(binf, scn))
        return row, phi
    except LensoptError as exc:
        return SweepRow(eps=eps, status=f"failed: {exc}"), None


def _eps_worker(args):
    # cold-start runs rebuild the scenario from its config so the payload
    # shipped to worker processes stays picklable
    config, eps, sigma_scale = args
    from .scenario import scenario_from_config
    scn = scenario_from_config(config).with_eps(eps)
    if sigma_scale is not None:
        scn.opt = replace(scn.opt, smoothing_sigma=sigma_scale * eps)
    return _run_one_eps(scn, scn.phi0)
