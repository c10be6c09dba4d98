"""Experiment runners shared by the command line and the test suite.

Each runner takes an :class:`ExperimentConfig` and returns an
:class:`Artifacts` bundle: CSV tables, JSON documents and a summary dict.
Nothing here touches the filesystem except reading custom state CSVs.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import observables as obs
from .commutability import (classify_region, joint_ladders, position_momentum_commutes)
from .errors import ValidationError
from .evolution import build_hamiltonian, evolve
from .geometry import Region, as_direction, line_rule, line_section
from .momentum_modes import build_mode, mode_matrices, union_spectrum
from .potentials import make_potential
from .state import (embed_physical, gaussian_packet, make_grid, random_smooth_state)

EXPERIMENTS = ("spectrum", "modes", "evolve", "ehrenfest", "uncertainty", "commute")

# Ehrenfest acceptance thresholds
MIN_ORDER = 1.7
POSITION_TOL = 1e-3
ABLATION_FACTOR = 100.0
IMPULSE_REL_TOL = 0.02
FLUX_CONSTANT = 10.0
DRIFT_TOL = 1e-8
BOUNCE_FRACTION = 1e-3


@dataclass(frozen=True)
class Numerics:
    h: float = 1.0 / 32
    dt: float = 1e-3
    steps: int = 100
    levels: int = 3
    n_modes: int = 64
    n_lines: int = 64
    n_quad: int = 1000
    n_min: int = -8
    n_max: int = 8
    n_grid: int = 201
    n_probe: int = 3
    n_boundary: int = 65
    force_order: int = 2
    anchor: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    region: dict
    state: dict | None = None
    numerics: Numerics = field(default_factory=Numerics)
    directions: tuple = ()
    potential: dict | None = None
    mass: float = 1.0
    seed: int = 0
    variant: str = "tensor_c4"
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data, experiment=None, base_dir="."):
        """Build from a schema-valid dict; ``experiment`` overrides the file."""
        exp = experiment or data.get("experiment")
        if exp not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {exp!r}")
        if data.get("experiment") not in (None, exp):
            raise ValidationError(
                f"config is for {data['experiment']!r} but {exp!r} was requested")
        known = {f.name for f in fields(Numerics)}
        num = Numerics(**{k: v for k, v in data.get("numerics", {}).items() if k in known})
        return cls(exp, data["region"], data.get("state"), num,
                   tuple(tuple(d) for d in data.get("directions", ())), data.get("potential"),
                   float(data.get("mass", 1.0)), int(data.get("seed", 0)),
                   data.get("variant", "tensor_c4"), str(base_dir))

    def direction(self, i=0):
        d = 1 if self.region["kind"] == "interval" else 2
        if len(self.directions) > i:
            return as_direction(self.directions[i], d)
        return np.eye(d)[i % d]


@dataclass
class Artifacts:
    csv: dict = field(default_factory=dict)   # file name -> text
    json: dict = field(default_factory=dict)  # file name -> JSON-ready object
    summary: dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# Builders


def _lam(value):
    if isinstance(value, list):
        return [1j * float(v) for v in value]
    return 1j * float(value)


def build_region(spec: dict) -> Region:
    """Region from its config block; lambda values are real multiples of i."""
    kind = spec["kind"]
    gamma = spec.get("gamma", "dirichlet")
    lam = {k: _lam(v) for k, v in spec.get("lambda", {}).items()}
    rid = spec.get("id", kind)
    if kind == "interval":
        return Region.interval(spec["a"], spec["b"], gamma, lam, rid)
    if kind == "rectangle":
        return Region.rectangle(spec["lx"], spec["ly"], tuple(spec.get("origin", (0, 0))),
                                gamma, lam, rid)
    if kind == "rounded_rectangle":
        return Region.rounded_rectangle(spec["lx"], spec["ly"], spec["r"],
                                        tuple(spec.get("origin", (0, 0))), gamma, lam, rid)
    if kind in ("polygon", "convex_polygon"):
        return Region.polygon(spec["vertices"], gamma, lam, rid, convex=kind == "convex_polygon")
    raise ValidationError(f"unknown region kind {kind!r}")


def _side_coordinate(region, wall):
    if region.kind == "interval_1d":
        table = {"left": (0, region.params["a"]), "right": (0, region.params["b"])}
        seg = {"left": 0, "right": 1}
    else:
        (ox, oy), lx, ly = region.params["origin"], region.params["lx"], region.params["ly"]
        table = {"left": (0, ox), "right": (0, ox + lx), "bottom": (1, oy), "top": (1, oy + ly)}
        seg = {"bottom": 0, "right": 1, "top": 2, "left": 3}
    if wall not in table:
        raise ValidationError(f"unknown wall {wall!r}")
    return table[wall] + (seg[wall],)


def grid_state(grid, spec: dict, rng, H=None, base_dir="."):
    """Physical grid state from the catalog."""
    kind = spec["kind"]
    region = grid.region
    if kind == "gaussian":
        center = np.atleast_1d(np.asarray(spec["center"], dtype=float))
        mom = np.atleast_1d(np.asarray(spec.get("momentum", [0.0] * grid.dim), dtype=float))
        w = float(spec["width"])
        coords = grid.coords
        ground = bool(spec.get("transverse_ground_mode", False)) and grid.dim == 2

        def packet(c, k):
            out = np.ones(grid.shape, dtype=complex)
            for ax in range(grid.dim):
                if ground and ax == 1:
                    continue
                u = coords[ax] - c[ax]
                out = out * np.exp(-u ** 2 / (2 * w ** 2) + 1j * k[ax] * u)
            return out

        psi = packet(center, mom)
        for wall in spec.get("mirror_walls", []):
            ax, pos, seg = _side_coordinate(region, wall)
            c, k = center.copy(), mom.copy()
            c[ax], k[ax] = 2 * pos - c[ax], -k[ax]
            psi = psi + (-1.0 if region.is_dirichlet(seg) else 1.0) * packet(c, k)
        if ground:
            (ox, oy), ly = region.params["origin"], region.params["ly"]
            psi = psi * np.sin(math.pi * (coords[1] - oy) / ly)
        return embed_physical(grid, psi).normalize()
    if kind in ("eigenmode", "eigenmodes"):
        if H is None:
            raise ValidationError("eigenmode states need the Hamiltonian")
        count = int(spec["n"]) + 1 if kind == "eigenmode" else int(spec.get("count", 6))
        A = H.matrix.real if not np.any(H.matrix.imag.data) else H.matrix
        vals, vecs = spla.eigsh(A, k=count, sigma=-1.0, which="LM")
        vecs = vecs[:, np.argsort(vals)].astype(complex)
        if kind == "eigenmode":
            u = vecs[:, -1]
        else:
            u = vecs @ (rng.normal(size=count) + 1j * rng.normal(size=count))
        return embed_physical(grid, H.expand(u)).normalize()
    if kind == "csv":
        path = Path(base_dir) / spec["path"]
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[0] != int(np.prod(grid.shape)):
            raise ValidationError(f"{path} has {data.shape[0]} rows, grid has {np.prod(grid.shape)}")
        psi = (data[:, -2] + 1j * data[:, -1]).reshape(grid.shape)
        return embed_physical(grid, psi).normalize()
    if kind == "random":
        st = random_smooth_state(region, rng, int(spec.get("n_terms", 3)),
                                 float(spec.get("max_momentum", 4.0)))
        return embed_physical(grid, st.on_grid(grid).scalar()).normalize()
    raise ValidationError(f"state kind {kind!r} is not available on grids")


def field_states(region, spec: dict, rng):
    """Closed-form physical states for quadrature-based experiments."""
    kind = spec["kind"]
    if kind == "gaussian":
        return [gaussian_packet(region, spec["center"], spec["width"],
                                spec.get("momentum", [0.0] * region.dim))]
    if kind == "random":
        return [random_smooth_state(region, rng, int(spec.get("n_terms", 3)),
                                    float(spec.get("max_momentum", 4.0)))
                for _ in range(int(spec.get("count", 1)))]
    raise ValidationError(f"state kind {kind!r} is not available for closed-form experiments")


# ----------------------------------------------------------------------------
# Output helpers


def csv_text(header, columns):
    """CSV with 17 significant digits, so reruns are byte-identical."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(cols) if cols else np.empty((0, 0)), delimiter=",",
               fmt="%.17g", header=",".join(header), comments="")
    return buf.getvalue()


def _grid_run_setup(cfg: ExperimentConfig, h, rng):
    region = build_region(cfg.region)
    grid = make_grid(region, h)
    potential = make_potential(cfg.potential, cfg.mass, grid.dim)
    H = build_hamiltonian(grid, cfg.mass, potential)
    state = grid_state(grid, cfg.state or {"kind": "random"}, rng, H, cfg.base_dir)
    return grid, potential, H, state


# ----------------------------------------------------------------------------
# Runners


def run_spectrum(cfg: ExperimentConfig) -> Artifacts:
    region = build_region(cfg.region)
    num = cfg.numerics
    l = cfg.direction(0)
    if region.dim == 1:
        anchors, sections = [math.nan], [line_section(region, l)]
    elif num.anchor is not None:
        anchors, sections = [num.anchor], [line_section(region, l, num.anchor)]
    else:
        lr = line_rule(region, l, num.n_lines)
        anchors, sections = list(lr.anchors), list(lr.sections)
    rows, degs = [], []
    for li, (a, sec) in enumerate(zip(anchors, sections)):
        us = union_spectrum(sec, num.n_min, num.n_max)
        for i, md in us.modes:
            iv = md.interval
            rows.append((li, a, i, iv.x_minus, iv.x_plus, iv.lambda_minus.imag,
                         iv.lambda_plus.imag, md.n, md.k,
                         abs(np.exp(2j * md.k * iv.length)
                             - (1 + iv.lambda_plus) * (1 - iv.lambda_minus)
                             / ((1 - iv.lambda_plus) * (1 + iv.lambda_minus)))))
        degs += [{"line": li, "pair": [list(p), list(q)]} for p, q in us.degeneracies]
    header = ["line", "anchor", "interval", "x_minus", "x_plus", "lambda_minus_im",
              "lambda_plus_im", "n", "k", "ladder_residual"]
    table = np.array(rows, dtype=float)
    summary = {"n_lines": len(sections), "n_entries": len(rows),
               "max_ladder_residual": float(table[:, -1].max()), "degeneracies": len(degs)}
    return Artifacts({"spectrum.csv": csv_text(header, table.T)},
                     {"report.json": {"summary": summary, "degeneracies": degs}}, summary)


def run_modes(cfg: ExperimentConfig) -> Artifacts:
    region = build_region(cfg.region)
    num = cfg.numerics
    sec = line_section(region, cfg.direction(0), None if region.dim == 1 else num.anchor or 0.0)
    if not sec.intervals:
        raise ValidationError("the line misses the region")
    iv = sec.intervals[0]
    mats = mode_matrices(iv, num.n_min, num.n_max, num.n_quad)
    modes = [build_mode(iv, n) for n in range(num.n_min, num.n_max + 1)]
    s = np.linspace(iv.x_minus, iv.x_plus, num.n_grid)
    rows = []
    for md in modes:
        e, o = md.components(s)
        rows.append(np.column_stack([np.full_like(s, md.n), s, e.real, e.imag, o.real, o.imag]))
    grid_rows = np.concatenate(rows)
    bc = np.array([md.bc_residual() for md in modes])
    table = [[md.n for md in modes], [md.k for md in modes],
             [md.sigma.real for md in modes], [md.sigma.imag for md in modes], bc[:, 0], bc[:, 1]]
    summary = {"interval": [iv.x_minus, iv.x_plus], "gram_deviation": mats.gram_deviation,
               "hermiticity_deviation": mats.hermiticity_deviation,
               "max_bc_residual": float(bc.max()), "n_quad": num.n_quad}
    return Artifacts(
        {"modes.csv": csv_text(["n", "k", "sigma_re", "sigma_im", "bc_res_minus", "bc_res_plus"],
                               table),
         "mode_grid.csv": csv_text(["n", "s", "phi_e_re", "phi_e_im", "phi_o_re", "phi_o_im"],
                                   grid_rows.T)},
        {"report.json": {"summary": summary}}, summary)


def run_evolve(cfg: ExperimentConfig) -> Artifacts:
    num = cfg.numerics
    rng = np.random.default_rng(cfg.seed)
    grid, potential, H, state = _grid_run_setup(cfg, num.h, rng)
    run = evolve(state, H, num.dt, num.steps, potential, force_order=num.force_order)
    names, cols = zip(*run.series())
    summary = {"steps": num.steps, "dt": num.dt, "h": num.h,
               "norm_drift": float(np.max(np.abs(run.norm - run.norm[0]))),
               "max_flux": float(run.flux.max()),
               "energy_drift": float(np.max(np.abs(run.energy - run.energy[0])))}
    return Artifacts({"timeseries.csv": csv_text(names, cols)}, {"report.json": {"summary": summary}},
                     summary)


@dataclass
class EhrenfestLevel:
    dt: float
    h: float
    run: object
    position: np.ndarray
    momentum: np.ndarray
    ablated: np.ndarray


@dataclass
class EhrenfestStudy:
    direction: np.ndarray
    levels: list
    checks: dict  # name -> {"value", "threshold", "passed"}

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())


def _orders(values):
    v = np.asarray(values, dtype=float)
    return np.log2(v[:-1] / v[1:])


def bounce_window(run, direction, fraction=BOUNCE_FRACTION):
    """Interior record indices where ``|F_B . l|`` exceeds ``fraction`` of its peak."""
    F = np.abs(run.force @ direction)[1:-1]
    return F > fraction * F.max()


def ehrenfest_study(cfg: ExperimentConfig) -> EhrenfestStudy:
    """Refinement study under ``(dt, h) -> (dt/2, h/2)`` with every check evaluated."""
    num = cfg.numerics
    l = cfg.direction(0)
    levels = []
    for i in range(num.levels):
        rng = np.random.default_rng(cfg.seed)
        dt, h = num.dt / 2 ** i, num.h / 2 ** i
        grid, potential, H, state = _grid_run_setup(cfg, h, rng)
        run = evolve(state, H, dt, num.steps * 2 ** i, potential, force_order=num.force_order)
        levels.append(EhrenfestLevel(dt, h, run, obs.ehrenfest_position_residual(run, l),
                                     obs.ehrenfest_momentum_residual(run, l),
                                     obs.ehrenfest_momentum_residual(run, l, include_force=False)))
    fine = levels[-1]
    pos_max = [float(lv.position.max()) for lv in levels]
    mom_max = [float(lv.momentum.max()) for lv in levels]
    checks = {}

    def put(name, value, threshold, passed):
        checks[name] = {"value": value, "threshold": threshold, "passed": bool(passed)}

    if len(levels) > 1:
        op, om = _orders(pos_max), _orders(mom_max)
        put("position_order", op.tolist(), MIN_ORDER, np.all(op >= MIN_ORDER))
        put("momentum_order", om.tolist(), MIN_ORDER, np.all(om >= MIN_ORDER))
    put("position_residual_fine", pos_max[-1], POSITION_TOL, pos_max[-1] < POSITION_TOL)
    win = bounce_window(fine.run, l)
    if np.any(win):
        ratio = float(fine.ablated[win].max() / fine.momentum[win].max())
        put("ablation_ratio", ratio, ABLATION_FACTOR, ratio >= ABLATION_FACTOR)
        imp = obs.impulse(fine.run, l)
        reversal = float(-2 * fine.run.p_R[0] @ l)
        rel = abs(imp - reversal) / abs(reversal)
        put("impulse_vs_reversal", {"impulse": imp, "reversal": reversal, "relative": rel},
            IMPULSE_REL_TOL, rel < IMPULSE_REL_TOL)
    for lv in levels:
        flux = float(lv.run.flux.max())
        drift = float(np.max(np.abs(lv.run.norm - lv.run.norm[0])))
        put(f"flux_h{lv.h:.6g}", flux, FLUX_CONSTANT * lv.h ** 2, flux <= FLUX_CONSTANT * lv.h ** 2)
        put(f"norm_drift_h{lv.h:.6g}", drift, DRIFT_TOL, drift < DRIFT_TOL)
    return EhrenfestStudy(l, levels, checks)


def run_ehrenfest(cfg: ExperimentConfig) -> Artifacts:
    study = ehrenfest_study(cfg)
    cols = [[], [], [], [], [], [], []]
    for i, lv in enumerate(study.levels):
        t = lv.run.times[1:-1]
        for c, v in zip(cols, (np.full_like(t, i), np.full_like(t, lv.dt), np.full_like(t, lv.h), t,
                               lv.position, lv.momentum, lv.ablated)):
            c.append(v)
    header = ["level", "dt", "h", "t", "position_residual", "momentum_residual",
              "momentum_residual_no_force"]
    summary = {"passed": study.passed, "checks": study.checks}
    return Artifacts({"residuals.csv": csv_text(header, [np.concatenate(c) for c in cols])},
                     {"report.json": summary}, summary)


UNCERTAINTY_COLUMNS = ("mean_xm", "delta_xm", "T", "gamma_boundary", "lhs", "rhs", "slack")


def run_uncertainty(cfg: ExperimentConfig) -> Artifacts:
    region = build_region(cfg.region)
    rng = np.random.default_rng(cfg.seed)
    states = field_states(region, cfg.state or {"kind": "random", "count": 1}, rng)
    m = cfg.direction(0)
    num = cfg.numerics
    reports = [obs.uncertainty_report(st, m, mass=cfg.mass, n_modes=num.n_modes,
                                      n_lines=num.n_lines) for st in states]
    table = [np.arange(len(reports))] + [[float(r[c]) for r in reports] for c in UNCERTAINTY_COLUMNS]
    passed = all(r.passed["inequality"] and r.finite() for r in reports)
    summary = {"n_states": len(reports), "min_slack": float(min(r["slack"] for r in reports)),
               "passed": passed}
    docs = [json.loads(r.to_json()) for r in reports]
    return Artifacts({"uncertainty.csv": csv_text(["state", *UNCERTAINTY_COLUMNS], table)},
                     {"report.json": {"summary": summary, "states": docs}}, summary)


def run_commute(cfg: ExperimentConfig) -> Artifacts:
    region = build_region(cfg.region)
    num = cfg.numerics
    dirs = cfg.directions or ((1.0, 0.0), (0.0, 1.0))
    verdict = classify_region(region, dirs, cfg.variant, num.n_probe, num.n_boundary)
    doc = verdict.to_json()
    rows = doc["evidence"].get("probes", [])
    header = ["n_x", "n_y", "mu_x", "mu_y", "max", "l2", "corner_arc"]
    table = [[p["n"][0] for p in rows], [p["n"][1] for p in rows], [p["mu"][0] for p in rows],
             [p["mu"][1] for p in rows], [p["max"] for p in rows], [p["l2"] for p in rows],
             [p.get("corner_arc", math.nan) for p in rows]]
    if verdict.verdict == "separable_parallelepiped":
        lx, ly = joint_ladders(region)
        doc["ladders"] = {"x": lx.k.tolist(), "y": ly.k.tolist()}
    rng = np.random.default_rng(cfg.seed)
    wit = position_momentum_commutes(dirs[0], dirs[1], region, rng, n_states=3)
    doc["position_momentum"] = {"commutes": wit.commutes, "dot": wit.dot,
                                "commutator_norms": wit.commutator_norms.tolist(),
                                "state_norms": wit.state_norms.tolist()}
    summary = {"verdict": verdict.verdict, "residual_max": verdict.residual_max}
    return Artifacts({"residuals.csv": csv_text(header, table)}, {"verdict.json": doc}, summary)


RUNNERS = {"spectrum": run_spectrum, "modes": run_modes, "evolve": run_evolve,
           "ehrenfest": run_ehrenfest, "uncertainty": run_uncertainty, "commute": run_commute}


def run(cfg: ExperimentConfig) -> Artifacts:
    return RUNNERS[cfg.experiment](cfg)
