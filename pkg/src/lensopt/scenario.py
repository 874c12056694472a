"""Scenario configuration: one key-value tree describes a complete run.

A scenario bundles the grid, time axis, materials, regularization,
excitation, focal region, target data, and solver/optimizer settings.
Configs are JSON files; every key has a default (DEFAULT_CONFIG below and
README), so `{}` is a valid config.  Validation errors name the offending
key.  Synthetic targets run the forward solver at a prescribed layout
phi_true and track its focal-region trace (the usual inverse-crime setup
for verifying gradients and optimizers, and labeled as such).
"""

import copy
import json
import math
import os
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ScenarioError
from .grid import Grid, assemble_weighted_mass, build_grid
from .medium import GLParams, MediumParams
from .optimizer import OptimizerConfig
from .wave import AlphaCoefficient, SourceSpec, solve_state

DEFAULT_CONFIG = {
    "grid": {"nx": 32, "ny": 32, "lx": 1.0, "ly": 1.0},
    "time": {"t_final": 1.0, "time_step": 1.0 / 64.0},
    "medium": {"c_lens": 1.0, "c_fluid": 2.0, "b_lens": 0.005, "b_fluid": 0.01,
               "k_lens": 0.5, "k_fluid": 1.5},
    "regularization": {"eps": 0.05, "gamma": 1e-3},
    "alpha": {"kind": "constant", "value": 1.0, "base": 1.0, "rate": 0.0,
              "amplitude": 0.0, "frequency": 1.0},
    "source": {"edges": ["left"], "amplitude": 0.2, "frequency": 3.0,
               "ramp_time": 0.5, "spatial": "gaussian", "center": 0.5,
               "width": 0.2},
    "initial_data": {"u0": 0.0, "u1": 0.0},
    "focal_region": {"shape": "disk", "center": [0.75, 0.5], "radius": 0.15,
                     "size": [0.2, 0.2]},
    "target": {"mode": "synthetic",
               "phi_true": {"kind": "disk_lens", "center": [0.35, 0.5],
                            "radius": 0.18, "interface_width": 0.05,
                            "value": 1.0},
               "path": "", "name": "ud"},
    "phi_initial": {"kind": "constant", "value": 1.0, "center": [0.5, 0.5],
                    "radius": 0.2, "interface_width": 0.05},
    "optimizer": {"step0": 1.0, "armijo_c1": 1e-4, "backtrack": 0.5,
                  "max_iterations": 30, "stationarity_tol": 1e-6,
                  "smoothing_sigma": 0.0, "history_stride": 1,
                  "max_backtracks": 30, "step_growth": 2.0,
                  "bb_seed": False, "pin_fluid_in_focal": False},
    "picard": {"tol": 1e-10, "max_sweeps": 25, "semi_lagged": False},
    "linear_solver": {"tol": 1e-12, "method": "auto"},
    "output_dir": "runs/out",
}


def _merge(defaults, user, path=""):
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ScenarioError(f"{where}: unknown configuration key")
        if isinstance(defaults[key], dict):
            if not isinstance(val, dict):
                raise ScenarioError(f"{where}: expected a table of settings")
            out[key] = _merge(defaults[key], val, where)
        else:
            out[key] = val
    return out


def _make_phase_field(grid: Grid, spec: dict, where: str) -> np.ndarray:
    x, y = grid.node_xy[:, 0], grid.node_xy[:, 1]
    kind = spec.get("kind", "constant")
    if kind == "constant":
        val = float(spec["value"])
        if not 0.0 <= val <= 1.0:
            raise ScenarioError(f"{where}.value: must lie in [0, 1]")
        return np.full(grid.n_nodes, val)
    if kind == "disk_lens":
        cx, cy = spec["center"]
        r = float(spec["radius"])
        w = float(spec.get("interface_width", 0.0))
        dist = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        if w <= 0.0:
            return (dist >= r).astype(float)
        return 0.5 * (1.0 + np.tanh(4.0 * (dist - r) / w))
    raise ScenarioError(f"{where}.kind: unknown phase-field kind {kind!r}")


def _make_d_mask(grid: Grid, spec: dict) -> np.ndarray:
    x, y = grid.node_xy[:, 0], grid.node_xy[:, 1]
    shape = spec.get("shape", "disk")
    cx, cy = spec["center"]
    if shape == "disk":
        r = float(spec["radius"])
        if r <= 0.0:
            raise ScenarioError("focal_region.radius: must be positive")
        if cx - r < 0 or cx + r > grid.lx or cy - r < 0 or cy + r > grid.ly:
            raise ScenarioError("focal_region: disk not contained in the domain")
        return (((x - cx) ** 2 + (y - cy) ** 2) <= r ** 2).astype(float)
    if shape == "rect":
        sx, sy = spec["size"]
        if sx <= 0 or sy <= 0:
            raise ScenarioError("focal_region.size: must be positive")
        if cx - sx / 2 < 0 or cx + sx / 2 > grid.lx or cy - sy / 2 < 0 or cy + sy / 2 > grid.ly:
            raise ScenarioError("focal_region: rectangle not contained in the domain")
        return ((np.abs(x - cx) <= sx / 2) & (np.abs(y - cy) <= sy / 2)).astype(float)
    raise ScenarioError(f"focal_region.shape: unknown shape {shape!r}")


def _make_alpha(spec: dict, t_final: float) -> AlphaCoefficient:
    kind = spec.get("kind", "constant")
    try:
        if kind == "constant":
            return AlphaCoefficient.constant(float(spec["value"]))
        if kind == "affine_t":
            return AlphaCoefficient.affine_t(float(spec["base"]),
                                             float(spec["rate"]), t_final)
        if kind == "sine_t":
            return AlphaCoefficient.sine_t(float(spec["base"]),
                                           float(spec["amplitude"]),
                                           float(spec["frequency"]))
    except ValueError as exc:
        raise ScenarioError(f"alpha: {exc}") from exc
    raise ScenarioError(f"alpha.kind: unknown kind {kind!r}")


def _make_source(grid: Grid, spec: dict, init: dict, tau: float,
                 n_steps: int) -> SourceSpec:
    u0 = np.full(grid.n_nodes, float(init["u0"]))
    u1 = np.full(grid.n_nodes, float(init["u1"]))
    amp = float(spec["amplitude"])
    edges = spec["edges"]
    g_edges = {}
    if amp != 0.0 and edges:
        t = tau * np.arange(n_steps + 1)
        freq = float(spec["frequency"])
        ramp_time = float(spec["ramp_time"])
        if ramp_time > 0.0:
            ramp = np.sin(0.5 * np.pi * np.minimum(t / ramp_time, 1.0)) ** 2
        else:
            ramp = np.ones_like(t)
        profile = amp * np.sin(2.0 * np.pi * freq * t) * ramp
        for edge in edges:
            if edge not in ("left", "right", "top", "bottom"):
                raise ScenarioError(f"source.edges: unknown edge {edge!r}")
            nodes = grid.edge_nodes(edge)
            coord = grid.node_xy[nodes, 1] if edge in ("left", "right") \
                else grid.node_xy[nodes, 0]
            extent = grid.ly if edge in ("left", "right") else grid.lx
            if spec["spatial"] == "uniform":
                shape_fn = np.ones(nodes.size)
            elif spec["spatial"] == "gaussian":
                c = float(spec["center"]) * extent
                w = float(spec["width"])
                if w <= 0.0:
                    raise ScenarioError("source.width: must be positive")
                shape_fn = np.exp(-((coord - c) / w) ** 2)
            else:
                raise ScenarioError(
                    f"source.spatial: unknown profile {spec['spatial']!r}")
            g_edges[edge] = profile[:, None] * shape_fn[None, :]
    return SourceSpec(u0=u0, u1=u1, g_edges=g_edges)


@dataclass
class Scenario:
    """A fully validated problem setup plus solver settings."""

    grid: Grid
    t_final: float
    tau: float
    n_steps: int
    mp: MediumParams
    glp: GLParams
    alpha: AlphaCoefficient
    src: SourceSpec
    d_mask: np.ndarray
    phi_true: np.ndarray | None
    phi0: np.ndarray
    opt: OptimizerConfig
    picard_tol: float
    picard_max: int
    semi_lagged: bool
    lin_tol: float
    lin_solver: str
    output_dir: str
    config: dict
    target_path: str = ""
    target_name: str = "ud"
    _u_d: np.ndarray | None = None

    @cached_property
    def m_d(self):
        """Mass matrix weighted by the focal-region indicator."""
        return assemble_weighted_mass(self.grid, self.d_mask)

    def solve_state(self, phi):
        return solve_state(self.grid, phi, self.mp, self.alpha, self.src,
                           self.tau, self.n_steps, picard_tol=self.picard_tol,
                           picard_max=self.picard_max,
                           semi_lagged=self.semi_lagged, lin_tol=self.lin_tol,
                           lin_solver=self.lin_solver)

    def target(self) -> np.ndarray:
        """Desired pressure trajectory; synthesized from phi_true on first use."""
        if self._u_d is None:
            if self.target_path:
                from .fileio import read_trajectory
                self._u_d = read_trajectory(self.target_path, self.target_name,
                                            self.n_steps, self.grid.n_nodes)
            else:
                state, _ = self.solve_state(self.phi_true)
                self._u_d = state.u
        return self._u_d

    def set_target(self, u_d: np.ndarray):
        u_d = np.asarray(u_d, dtype=float)
        if u_d.shape != (self.n_steps + 1, self.grid.n_nodes):
            raise ScenarioError("target: trajectory shape mismatch")
        self._u_d = u_d

    def with_eps(self, eps: float) -> "Scenario":
        """Copy of the scenario with a different interface width."""
        out = replace(self, glp=GLParams(eps=eps, gamma=self.glp.gamma))
        out.config = copy.deepcopy(self.config)
        out.config["regularization"]["eps"] = eps
        return out


def scenario_from_config(config: dict, resolution_scale: int = 1,
                         base_dir: str = ".") -> Scenario:
    """Build and validate a Scenario from a (possibly partial) config tree."""
    cfg = _merge(DEFAULT_CONFIG, config)
    if resolution_scale < 1 or int(resolution_scale) != resolution_scale:
        raise ScenarioError("resolution_scale: must be a positive integer")
    scale = int(resolution_scale)

    gspec = cfg["grid"]
    try:
        grid = build_grid(int(gspec["nx"]) * scale, int(gspec["ny"]) * scale,
                          float(gspec["lx"]), float(gspec["ly"]))
    except ValueError as exc:
        raise ScenarioError(f"grid: {exc}") from exc

    t_final = float(cfg["time"]["t_final"])
    tau = float(cfg["time"]["time_step"]) / scale
    if t_final <= 0.0 or tau <= 0.0:
        raise ScenarioError("time_step: t_final and time_step must be positive")
    n_float = t_final / tau
    n_steps = round(n_float)
    if n_steps < 3 or abs(n_steps * tau - t_final) > 1e-9 * t_final:
        raise ScenarioError(
            f"time_step: {tau:g} does not divide t_final {t_final:g} "
            f"into an integer number (>= 3) of steps")

    m = cfg["medium"]
    try:
        mp = MediumParams(c_lens=float(m["c_lens"]), c_fluid=float(m["c_fluid"]),
                          b_lens=float(m["b_lens"]), b_fluid=float(m["b_fluid"]),
                          k_lens=float(m["k_lens"]), k_fluid=float(m["k_fluid"]))
    except ValueError as exc:
        raise ScenarioError(f"medium: {exc}") from exc

    r = cfg["regularization"]
    try:
        glp = GLParams(eps=float(r["eps"]), gamma=float(r["gamma"]))
    except ValueError as exc:
        raise ScenarioError(f"regularization: {exc}") from exc

    alpha = _make_alpha(cfg["alpha"], t_final)
    src = _make_source(grid, cfg["source"], cfg["initial_data"], tau, n_steps)
    d_mask = _make_d_mask(grid, cfg["focal_region"])

    tgt = cfg["target"]
    phi_true = None
    target_path = ""
    if tgt["mode"] == "synthetic":
        phi_true = _make_phase_field(grid, tgt["phi_true"], "target.phi_true")
    elif tgt["mode"] == "file":
        target_path = os.path.join(base_dir, tgt["path"])
        if not os.path.isdir(target_path):
            raise ScenarioError(f"target.path: no such directory {target_path!r}")
        missing = [n for n in range(n_steps + 1)
                   if not os.path.exists(os.path.join(
                       target_path, f"{tgt['name']}_{n:06d}.vtk"))]
        if missing:
            raise ScenarioError(
                f"target.path: missing snapshot files for steps {missing[:4]}...")
    else:
        raise ScenarioError(f"target.mode: unknown mode {tgt['mode']!r}")

    phi0 = _make_phase_field(grid, cfg["phi_initial"], "phi_initial")

    o = cfg["optimizer"]
    try:
        opt = OptimizerConfig(
            step0=float(o["step0"]), armijo_c1=float(o["armijo_c1"]),
            backtrack=float(o["backtrack"]),
            max_iterations=int(o["max_iterations"]),
            stationarity_tol=float(o["stationarity_tol"]),
            smoothing_sigma=float(o["smoothing_sigma"]),
            history_stride=int(o["history_stride"]),
            max_backtracks=int(o["max_backtracks"]),
            step_growth=float(o["step_growth"]), bb_seed=bool(o["bb_seed"]),
            pin_fluid_in_focal=bool(o["pin_fluid_in_focal"]))
    except ValueError as exc:
        raise ScenarioError(f"optimizer: {exc}") from exc

    p = cfg["picard"]
    if not (0.0 < float(p["tol"]) <= 1e-4):
        raise ScenarioError("picard.tol: must lie in (0, 1e-4]")
    lt = float(cfg["linear_solver"]["tol"])
    if not (0.0 < lt <= 1e-4):
        raise ScenarioError("linear_solver.tol: must lie in (0, 1e-4]")
    method = cfg["linear_solver"]["method"]
    if method not in ("auto", "cg", "direct"):
        raise ScenarioError("linear_solver.method: must be auto, cg, or direct")

    return Scenario(grid=grid, t_final=t_final, tau=tau, n_steps=n_steps,
                    mp=mp, glp=glp, alpha=alpha, src=src, d_mask=d_mask,
                    phi_true=phi_true, phi0=phi0, opt=opt,
                    picard_tol=float(p["tol"]), picard_max=int(p["max_sweeps"]),
                    semi_lagged=bool(p["semi_lagged"]), lin_tol=lt,
                    lin_solver=method,
                    output_dir=cfg["output_dir"], config=cfg,
                    target_path=target_path, target_name=tgt["name"])


def load_scenario(path: str, resolution_scale: int = 1) -> Scenario:
    """Read, parse, and validate a JSON scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"parse error in {path!r} at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"config {path!r} must contain a JSON object")
    return scenario_from_config(raw, resolution_scale=resolution_scale,
                                base_dir=os.path.dirname(os.path.abspath(path)))
