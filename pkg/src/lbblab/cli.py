"""Experiment runner: JSON configs in, deterministic CSV tables and SVG plots out.

Subcommands `beta`, `sweep`, `spectrum`, `polygon`, `perturb` each take
--config <file> plus overriding --out and --seed.  Exit codes: 0 all good,
1 computation error, 2 a declared check failed under --check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic, perturb
from .fem import BoundaryCondition, Continuity, ElementSpace, Family
from .geometry import (
    Mesh,
    SvSplitParams,
    element_sizes,
    load_mesh,
    rect_grid,
    refine_chain,
    regular_polygon_mesh,
    save_mesh,
    sv_split,
)
from .infsup import BetaResult, PairConfig, compute_beta, eigenfunction_export
from .spectral import EigenSolverError, NotPositiveDefinite, SolverOptions
from .svgplot import line_plot

_BETA_COLS = [
    "config_hash",
    "n_velocity",
    "n_pressure",
    "max_diameter_velocity",
    "min_inradius_pressure",
    "beta",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[check] {self.name}: {'pass' if self.passed else 'FAIL'} ({self.detail})"


@dataclass
class RunOutput:
    csv: str
    extra_csv: dict = field(default_factory=dict)
    svgs: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)


def _g(x: float) -> str:
    return f"{float(x):.17g}"


def _cfg_hash(cfg: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


def _solver_options(cfg: dict, seed_override=None) -> SolverOptions:
    s = dict(cfg.get("solver", {}))
    if seed_override is not None:
        s["seed"] = seed_override
    return SolverOptions(
        residual_tol=float(s.get("residual_tol", 1e-10)),
        symmetry_tol=float(s.get("symmetry_tol", 1e-10)),
        dense_cap=s.get("dense_cap"),
        mixed_cap=int(s.get("mixed_cap", 3000)),
        seed=int(s.get("seed", 0)),
        max_iterations=int(s.get("max_iterations", 20000)),
    )


def _center_quad(grid: Mesh) -> int:
    lo = grid.points.min(axis=0)
    hi = grid.points.max(axis=0)
    center = 0.5 * (lo + hi)
    centroids = grid.points[grid.quads].mean(axis=1)
    return int(np.argmin(np.linalg.norm(centroids - center, axis=1)))


def sv_mesh(
    width: float,
    height: float,
    nx: int,
    ny: int,
    b: float,
    a: float | None = None,
    special_quad: int | None = None,
) -> Mesh:
    """Rectangle quad grid split into four triangles per quad; the special
    quad (default: nearest the domain center) gets decentering `a`."""
    grid = rect_grid(width, height, nx, ny)
    if a is None:
        params = SvSplitParams(b=b)
    else:
        idx = special_quad if special_quad is not None else _center_quad(grid)
        params = SvSplitParams(b=b, special=(idx, a))
    return sv_split(grid, params)


def _spaces(cfg: dict, family: Family) -> tuple[ElementSpace, ElementSpace]:
    vel = ElementSpace(
        family,
        int(cfg["velocity_degree"]),
        Continuity.C0,
        BoundaryCondition.ZERO_TRACE,
    )
    pcont = Continuity(cfg.get("pressure_continuity", "dc"))
    pre = ElementSpace(family, int(cfg["pressure_degree"]), pcont, BoundaryCondition.NONE)
    return vel, pre


def _domain_mesh(cfg: dict) -> Mesh:
    dom = cfg["domain"]
    kind = dom["type"]
    if kind == "rectangle":
        disc = cfg["mesh"]
        if disc.get("split", False):
            mesh = sv_mesh(
                dom["width"],
                dom["height"],
                disc["nx"],
                disc["ny"],
                disc.get("b", 0.0),
                disc.get("a"),
                disc.get("special_quad"),
            )
        else:
            mesh = rect_grid(dom["width"], dom["height"], disc["nx"], disc["ny"])
        for _ in range(int(disc.get("refine", 0))):
            mesh, _pm = refine_chain(mesh, 1)
        return mesh
    if kind == "polygon":
        return regular_polygon_mesh(int(dom["n"]), int(cfg.get("mesh", {}).get("refine", 0)))
    if kind == "mesh-file":
        return load_mesh(dom["path"])
    raise ValueError(f"unknown domain type {kind!r}")


def _beta_cells(result: BetaResult | None, k: int, flagged: int, tol: float) -> list[str]:
    if result is None:
        return (
            ["failed", "0", "0", "nan", "nan", "nan"]
            + ["nan"] * k
            + ["nan", "1"]
        )
    flag = 1 if (flagged or result.residual_max > tol) else 0
    sig = list(result.sigmas[:k]) + [float("nan")] * max(0, k - len(result.sigmas))
    return [
        result.config_hash,
        str(result.n_velocity),
        str(result.n_pressure),
        _g(result.max_diameter_velocity),
        _g(result.min_inradius_pressure),
        _g(result.beta),
        *[_g(s) for s in sig],
        _g(result.residual_max),
        str(flag),
    ]


def _beta_header(k: int) -> list[str]:
    return _BETA_COLS + [f"sigma_{j + 1}" for j in range(k)] + ["residual_max", "flagged"]


def _safe_beta(config: PairConfig, k: int) -> BetaResult | None:
    try:
        return compute_beta(config, k=k)
    except (EigenSolverError, NotPositiveDefinite):
        return None


def _parallel(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _parse_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# ----------------------------------------------------------------------
# single beta / spectrum
# ----------------------------------------------------------------------

def run_single_beta(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    solver = _solver_options(cfg, seed)
    mesh = _domain_mesh(cfg)
    if cfg.get("mesh_out"):
        save_mesh(mesh, cfg["mesh_out"])
    family = Family.QUAD if mesh.is_quad else Family.TRIANGLE
    vel, pre = _spaces(cfg["elements"], family)
    k = int(cfg.get("k", 6))
    pc = PairConfig(
        velocity_space=vel,
        pressure_space=pre,
        velocity_mesh=mesh,
        deflate_constants=bool(cfg.get("deflate_constants", True)),
        solver=solver,
    )
    result = compute_beta(pc, k=k)
    if cfg.get("eigenfunction_out"):
        eigenfunction_export(result, cfg["eigenfunction_out"])
    rows = [_beta_cells(result, k, 0, solver.residual_tol)]
    checks = []
    if "beta_range" in cfg:
        lo, hi = cfg["beta_range"]
        checks.append(
            CheckResult(
                "beta-range",
                lo <= result.beta <= hi,
                f"beta={result.beta:.6g} in [{lo:.6g}, {hi:.6g}]",
            )
        )
    if "beta_ref" in cfg:
        slack = float(cfg.get("slack", 0.005))
        checks.append(
            CheckResult(
                "usc",
                result.beta <= float(cfg["beta_ref"]) + slack,
                f"beta={result.beta:.6g} <= {cfg['beta_ref']} + {slack}",
            )
        )
    return RunOutput(csv=_csv_text(_beta_header(k), rows), checks=checks)


def run_spectrum(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    solver = _solver_options(cfg, seed)
    mesh = _domain_mesh(cfg)
    family = Family.QUAD if mesh.is_quad else Family.TRIANGLE
    vel, pre = _spaces(cfg["elements"], family)
    k = int(cfg.get("k", 6))
    pc = PairConfig(
        velocity_space=vel,
        pressure_space=pre,
        velocity_mesh=mesh,
        deflate_constants=bool(cfg.get("deflate_constants", True)),
        solver=solver,
    )
    result = compute_beta(pc, k=k)
    corners = [float(w) for w in cfg.get("corner_angles", [])]
    low, high = (analytic.cosserat_interval(corners[0]) if corners else (float("nan"),) * 2)
    header = ["config_hash", "j", "sigma", "cosserat_low", "cosserat_high",
              "residual_max", "flagged"]
    flag = 1 if result.residual_max > solver.residual_tol else 0
    rows = [
        [result.config_hash, str(j + 1), _g(s), _g(low), _g(high),
         _g(result.residual_max), str(flag)]
        for j, s in enumerate(result.sigmas)
    ]
    text = _csv_text(header, rows)
    svg = plot_spectrum(_parse_csv(text))
    checks = [
        CheckResult(
            "sigma-bounds",
            bool((result.sigmas >= -1e-9).all() and (result.sigmas <= 1.0 + 1e-9).all()),
            f"{len(result.sigmas)} eigenvalues in [0, 1]",
        )
    ]
    extra = {}
    if corners:
        irows = [
            [_g(w), _g(analytic.cosserat_interval(w)[0]), _g(analytic.cosserat_interval(w)[1])]
            for w in corners
        ]
        extra["intervals"] = _csv_text(["omega", "low", "high"], irows)
    return RunOutput(csv=text, extra_csv=extra, svgs={"": svg}, checks=checks)


def plot_spectrum(rows: list[dict]) -> str:
    xs = [float(r["j"]) for r in rows]
    ys = [float(r["sigma"]) for r in rows]
    refs = []
    if rows and not math.isnan(float(rows[0]["cosserat_low"])):
        refs = [
            ("essential low", float(rows[0]["cosserat_low"])),
            ("essential high", float(rows[0]["cosserat_high"])),
        ]
    return line_plot(
        [("sigma_j", xs, ys)],
        "eigenvalue index",
        "sigma",
        title="Schur spectrum",
        ref_lines=refs,
    )


# ----------------------------------------------------------------------
# Scott-Vogelius sweep over the special decentering a
# ----------------------------------------------------------------------

def run_sv_sweep(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    solver = _solver_options(cfg, seed)
    width, height = float(cfg["width"]), float(cfg["height"])
    grids = [tuple(g) for g in cfg["grids"]]
    b = float(cfg.get("b", 0.4))
    a0 = float(cfg.get("a_start", -0.49))
    a1 = float(cfg.get("a_stop", 0.49))
    da = float(cfg.get("a_step", 0.01))
    n_steps = int(round((a1 - a0) / da))
    a_values = [round(a0 + i * da, 12) for i in range(n_steps + 1)]
    k = int(cfg.get("k", 6))
    special = cfg.get("special_quad")
    vdeg, pdeg = int(cfg.get("velocity_degree", 4)), int(cfg.get("pressure_degree", 3))
    beta_ref = cfg.get("beta_ref")

    points = [(gi, g, a) for gi, g in enumerate(grids) for a in a_values]

    def work(item):
        _, (nx, ny), a = item
        try:
            mesh = sv_mesh(width, height, nx, ny, b, a, special)
        except Exception:
            return None
        vel = ElementSpace(Family.TRIANGLE, vdeg, Continuity.C0, BoundaryCondition.ZERO_TRACE)
        pre = ElementSpace(Family.TRIANGLE, pdeg, Continuity.DISCONTINUOUS, BoundaryCondition.NONE)
        pc = PairConfig(velocity_space=vel, pressure_space=pre, velocity_mesh=mesh, solver=solver)
        return _safe_beta(pc, k)

    results = _parallel(work, points, jobs)
    header = ["mesh", "a", "beta_ref"] + _beta_header(k)
    rows = []
    for (gi, (nx, ny), a), res in zip(points, results):
        lead = [f"{nx}x{ny}", _g(a), _g(beta_ref) if beta_ref is not None else "nan"]
        rows.append(lead + _beta_cells(res, k, 0, solver.residual_tol))
    text = _csv_text(header, rows)
    parsed = _parse_csv(text)
    svgs = {
        "": plot_sv_sweep(parsed),
        "diff_fine": plot_sv_sweep_diff_fine(parsed),
    }
    if beta_ref is not None:
        svgs["diff_ref"] = plot_sv_sweep_diff_ref(parsed)

    # least-squares slope of beta(a) through the origin on a small window
    w0, w1 = cfg.get("slope_window", [0.02, 0.10])
    slope_rows = []
    for nx, ny in grids:
        label = f"{nx}x{ny}"
        pts = [
            (float(r["a"]), float(r["beta"]))
            for r in parsed
            if r["mesh"] == label and w0 - 1e-12 <= float(r["a"]) <= w1 + 1e-12
        ]
        if not pts:
            continue
        aa = np.array([p[0] for p in pts])
        bb = np.array([p[1] for p in pts])
        slope = float(aa @ bb / (aa @ aa))
        fit = slope * aa
        rel = float(np.linalg.norm(bb - fit) / np.linalg.norm(fit))
        slope_rows.append([label, _g(w0), _g(w1), _g(slope), _g(rel)])
    extra = {
        "slopes": _csv_text(["mesh", "a_min", "a_max", "slope", "relative_residual"], slope_rows)
    }

    checks = []
    if beta_ref is not None:
        slack = float(cfg.get("slack", 0.005))
        betas = [float(r["beta"]) for r in parsed if r["flagged"] == "0"]
        worst = max(betas) if betas else float("nan")
        checks.append(
            CheckResult(
                "usc-all-rows",
                bool(betas) and worst <= float(beta_ref) + slack,
                f"max beta={worst:.6g} <= {beta_ref} + {slack}",
            )
        )
    if any(abs(a) < 1e-12 for a in a_values):
        zero_max = float(cfg.get("zero_beta_max", 1e-6))
        z = [
            float(r["beta"])
            for r in parsed
            if abs(float(r["a"])) < 1e-12 and r["flagged"] == "0"
        ]
        checks.append(
            CheckResult(
                "singular-point",
                bool(z) and max(z) <= zero_max,
                f"beta(a=0) max={max(z) if z else float('nan'):.3g} <= {zero_max:g}",
            )
        )
    if slope_rows:
        rel_max = max(float(r[4]) for r in slope_rows)
        checks.append(
            CheckResult(
                "linear-near-zero",
                rel_max < float(cfg.get("slope_rel_tol", 0.2)),
                f"max relative residual {rel_max:.3g} < {cfg.get('slope_rel_tol', 0.2)}",
            )
        )
    return RunOutput(csv=text, extra_csv=extra, svgs=svgs, checks=checks)


def _series_by_mesh(rows: list[dict]):
    order = []
    for r in rows:
        if r["mesh"] not in order:
            order.append(r["mesh"])
    return order


def plot_sv_sweep(rows: list[dict]) -> str:
    series = []
    for label in _series_by_mesh(rows):
        sub = [r for r in rows if r["mesh"] == label]
        series.append(
            (label, [float(r["a"]) for r in sub], [float(r["beta"]) for r in sub])
        )
    refs = []
    ref = float(rows[0]["beta_ref"]) if rows else float("nan")
    if not math.isnan(ref):
        refs = [("reference", ref)]
    return line_plot(series, "a", "beta_n(a)", title="inf-sup constant vs decentering",
                     ref_lines=refs)


def plot_sv_sweep_diff_fine(rows: list[dict]) -> str:
    labels = _series_by_mesh(rows)
    finest = max(labels, key=lambda lab: max(
        int(r["n_velocity"]) for r in rows if r["mesh"] == lab))
    fine = {r["a"]: float(r["beta"]) for r in rows if r["mesh"] == finest}
    series = []
    for label in labels:
        if label == finest:
            continue
        sub = [r for r in rows if r["mesh"] == label and r["a"] in fine]
        xs = [float(r["a"]) for r in sub]
        ys = []
        for r in sub:
            bf = fine[r["a"]]
            d = (bf - float(r["beta"])) / bf if bf > 0 else float("nan")
            ys.append(d)
        series.append((label, xs, ys))
    return line_plot(series, "a", "log10 relative difference to finest mesh",
                     title="mesh convergence", log_y=True)


def plot_sv_sweep_diff_ref(rows: list[dict]) -> str:
    series = []
    for label in _series_by_mesh(rows):
        sub = [r for r in rows if r["mesh"] == label]
        xs = [float(r["a"]) for r in sub]
        ys = [float(r["beta_ref"]) - float(r["beta"]) for r in sub]
        series.append((label, xs, ys))
    return line_plot(series, "a", "log10 difference to reference",
                     title="distance to the continuous value", log_y=True)


# ----------------------------------------------------------------------
# p-version sweep
# ----------------------------------------------------------------------

def _pressure_degree(rule: dict, n: int) -> int | None:
    kind = rule["type"]
    if kind == "offset":
        k = n - int(rule["d"])
    elif kind == "half":
        k = (n + 1) // 2
    elif kind == "sqrt":
        k = math.ceil(float(rule.get("coefficient", 1.0)) * math.sqrt(n))
    elif kind == "fixed":
        k = int(rule["k"])
    else:
        raise ValueError(f"unknown degree rule {kind!r}")
    return k if k >= 0 else None


def _rule_label(rule: dict) -> str:
    kind = rule["type"]
    if kind == "offset":
        return f"k=n-{rule['d']}"
    if kind == "half":
        return "k=ceil(n/2)"
    if kind == "sqrt":
        return f"k=ceil({rule.get('coefficient', 1.0)}*sqrt(n))"
    return f"k={rule['k']}"


def run_p_sweep(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    solver = _solver_options(cfg, seed)
    width, height = float(cfg["width"]), float(cfg["height"])
    grids = [tuple(g) for g in cfg["grids"]]
    n_values = [int(n) for n in cfg["n_values"]]
    rules = cfg.get("k_rules") or [cfg["k_rule"]]
    k = int(cfg.get("k", 6))
    beta_ref = cfg.get("beta_ref")

    points = [
        (g, rule, n) for g in grids for rule in rules for n in n_values
    ]

    def work(item):
        (nx, ny), rule, n = item
        kdeg = _pressure_degree(rule, n)
        if kdeg is None or n < 1:
            return None, None
        mesh = rect_grid(width, height, nx, ny)
        vel = ElementSpace(Family.QUAD, n, Continuity.C0, BoundaryCondition.ZERO_TRACE)
        pre = ElementSpace(Family.QUAD, kdeg, Continuity.DISCONTINUOUS, BoundaryCondition.NONE)
        try:
            pc = PairConfig(velocity_space=vel, pressure_space=pre, velocity_mesh=mesh,
                            solver=solver)
            return kdeg, compute_beta(pc, k=min(k, mesh.n_elements * (kdeg + 1) ** 2 - 1))
        except (EigenSolverError, NotPositiveDefinite, ValueError):
            return kdeg, None

    results = _parallel(work, points, jobs)
    header = ["mesh", "rule", "n", "pressure_degree", "beta_ref"] + _beta_header(k)
    rows = []
    for ((nx, ny), rule, n), (kdeg, res) in zip(points, results):
        if kdeg is None:
            continue
        lead = [
            f"{nx}x{ny}",
            _rule_label(rule),
            str(n),
            str(kdeg),
            _g(beta_ref) if beta_ref is not None else "nan",
        ]
        rows.append(lead + _beta_cells(res, k, 0, solver.residual_tol))
    text = _csv_text(header, rows)
    parsed = _parse_csv(text)
    svgs = {"": plot_p_sweep(parsed)}
    checks = []
    # opt-in: full p-sweeps include tiny pressure spaces whose beta may
    # legitimately exceed the continuous reference
    if beta_ref is not None and cfg.get("check_usc", False):
        slack = float(cfg.get("slack", 0.005))
        betas = [float(r["beta"]) for r in parsed if r["flagged"] == "0"]
        worst = max(betas) if betas else float("nan")
        checks.append(
            CheckResult(
                "usc-all-rows",
                bool(betas) and worst <= float(beta_ref) + slack,
                f"max beta={worst:.6g} <= {beta_ref} + {slack}",
            )
        )
    if "converge_tol" in cfg and beta_ref is not None:
        tol = float(cfg["converge_tol"])
        ok = True
        detail = []
        for (nx, ny) in grids:
            for rule in rules:
                lbl = (f"{nx}x{ny}", _rule_label(rule))
                sub = [r for r in parsed if (r["mesh"], r["rule"]) == lbl and r["flagged"] == "0"]
                sub.sort(key=lambda r: int(r["n"]))
                if not sub:
                    ok = False
                    continue
                errs = [abs(float(r["beta"]) - float(beta_ref)) for r in sub]
                mono = all(e2 <= e1 + 1e-9 for e1, e2 in zip(errs, errs[1:]))
                ok = ok and mono and errs[-1] < tol
                detail.append(f"{lbl}: final err {errs[-1]:.4g}")
        checks.append(CheckResult("p-convergence", ok, "; ".join(detail)))
    return RunOutput(csv=text, svgs=svgs, checks=checks)


def plot_p_sweep(rows: list[dict]) -> str:
    combos = []
    for r in rows:
        key = (r["mesh"], r["rule"])
        if key not in combos:
            combos.append(key)
    series = []
    for mesh_label, rule in combos:
        sub = [r for r in rows if (r["mesh"], r["rule"]) == (mesh_label, rule)]
        sub.sort(key=lambda r: int(r["n"]))
        series.append(
            (
                f"{mesh_label} {rule}",
                [float(r["n"]) for r in sub],
                [float(r["beta"]) for r in sub],
            )
        )
    refs = []
    ref = float(rows[0]["beta_ref"]) if rows else float("nan")
    if not math.isnan(ref):
        refs = [("reference", ref)]
    return line_plot(series, "velocity degree n", "beta_n",
                     title="p-version inf-sup constants", ref_lines=refs)


# ----------------------------------------------------------------------
# h-refinement (nested velocity/pressure meshes)
# ----------------------------------------------------------------------

def run_h_refinement(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    solver = _solver_options(cfg, seed)
    width, height = float(cfg["width"]), float(cfg["height"])
    family = cfg.get("family", "quad")
    vdeg, pdeg = int(cfg.get("velocity_degree", 2)), int(cfg.get("pressure_degree", 0))
    pcont = Continuity(cfg.get("pressure_continuity", "dc"))
    grids = [tuple(g) for g in cfg["pressure_grids"]]
    rule = cfg.get("refine_velocity", {"mode": "fixed", "r": 1})
    k = int(cfg.get("k", 6))
    beta_ref = cfg.get("beta_ref")

    def depth(i: int) -> int:
        if rule["mode"] == "fixed":
            return int(rule["r"])
        return int(rule.get("start", 1)) + i * int(rule.get("step", 1))

    def work(item):
        i, (nx, ny) = item
        if family == "quad":
            pmesh = rect_grid(width, height, nx, ny)
            fam = Family.QUAD
        else:
            pmesh = sv_mesh(width, height, nx, ny, float(cfg.get("b", 0.25)))
            fam = Family.TRIANGLE
        r = depth(i)
        vmesh, pm = refine_chain(pmesh, r)
        vel = ElementSpace(fam, vdeg, Continuity.C0, BoundaryCondition.ZERO_TRACE)
        pre = ElementSpace(fam, pdeg, pcont, BoundaryCondition.NONE)
        pc = PairConfig(
            velocity_space=vel,
            pressure_space=pre,
            velocity_mesh=vmesh,
            pressure_mesh=pmesh if pm is not None else None,
            parent_map=pm,
            solver=solver,
        )
        res = _safe_beta(pc, k)
        hx, _ = element_sizes(vmesh)
        _, hm = element_sizes(pmesh)
        return r, hx, hm, res

    items = list(enumerate(grids))
    results = _parallel(work, items, jobs)
    header = ["mesh", "refine_depth", "h_velocity", "h_pressure", "ratio", "beta_ref"] + _beta_header(k)
    rows = []
    for (i, (nx, ny)), (r, hx, hm, res) in zip(items, results):
        lead = [
            f"{nx}x{ny}",
            str(r),
            _g(hx),
            _g(hm),
            _g(hx / hm),
            _g(beta_ref) if beta_ref is not None else "nan",
        ]
        rows.append(lead + _beta_cells(res, k, 0, solver.residual_tol))
    text = _csv_text(header, rows)
    parsed = _parse_csv(text)
    checks = []
    # opt-in for the same reason as the p-sweep: coarse-pressure rows of a
    # nested study may sit above the continuous reference
    if beta_ref is not None and cfg.get("check_usc", False):
        slack = float(cfg.get("slack", 0.005))
        betas = [float(r_["beta"]) for r_ in parsed if r_["flagged"] == "0"]
        worst = max(betas) if betas else float("nan")
        checks.append(
            CheckResult(
                "usc-all-rows",
                bool(betas) and worst <= float(beta_ref) + slack,
                f"max beta={worst:.6g} <= {beta_ref} + {slack}",
            )
        )
    return RunOutput(csv=text, svgs={"": plot_h_refinement(parsed)}, checks=checks)


def plot_h_refinement(rows: list[dict]) -> str:
    xs = [float(r["ratio"]) for r in rows]
    ys = [float(r["beta"]) for r in rows]
    refs = []
    if rows and not math.isnan(float(rows[0]["beta_ref"])):
        refs = [("reference", float(rows[0]["beta_ref"]))]
    return line_plot(
        [("beta_n", xs, ys)],
        "mesh-size ratio h_velocity / h_pressure",
        "beta_n",
        title="h-refinement with nested meshes",
        ref_lines=refs,
    )


# ----------------------------------------------------------------------
# polygon-to-disk limit
# ----------------------------------------------------------------------

def run_polygon_limit(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    solver = _solver_options(cfg, seed)
    n_values = [int(n) for n in cfg.get("n_values", [8, 16, 32, 64])]
    refine = int(cfg.get("refine", 1))
    vdeg, pdeg = int(cfg.get("velocity_degree", 4)), int(cfg.get("pressure_degree", 3))
    k = int(cfg.get("k", 6))
    eps_grid = int(cfg.get("eps_grid", 512))

    def work(n):
        mesh = regular_polygon_mesh(n, refine)
        vel = ElementSpace(Family.TRIANGLE, vdeg, Continuity.C0, BoundaryCondition.ZERO_TRACE)
        pre = ElementSpace(Family.TRIANGLE, pdeg, Continuity.DISCONTINUOUS, BoundaryCondition.NONE)
        pc = PairConfig(velocity_space=vel, pressure_space=pre, velocity_mesh=mesh, solver=solver)
        res = _safe_beta(pc, k)
        est = perturb.polygon_disk_eps(n, grid_density=eps_grid)
        return res, est

    results = _parallel(work, n_values, jobs)
    disk = analytic.beta_disk().value
    header = (
        ["n", "lower_bound", "upper_bound", "gap_bound", "gap", "eps_forward",
         "eps_inverse", "jacobian_deviation"]
        + _beta_header(k)
    )
    rows = []
    for n, (res, est) in zip(n_values, results):
        low, up = analytic.polygon_bounds(n)
        gap = disk - res.beta if res is not None else float("nan")
        lead = [
            str(n),
            _g(low.value),
            _g(up.value),
            _g(analytic.polygon_gap_bound(n)),
            _g(gap),
            _g(est.eps_forward),
            _g(est.eps_inverse),
            _g(est.jacobian_deviation),
        ]
        rows.append(lead + _beta_cells(res, k, 0, solver.residual_tol))
    text = _csv_text(header, rows)
    parsed = _parse_csv(text)
    checks = []
    lower_slack = float(cfg.get("lower_slack", 0.01))
    upper_slack = float(cfg.get("upper_slack", 0.005))
    ok_bounds = all(
        float(r["lower_bound"]) - lower_slack <= float(r["beta"]) <= disk + upper_slack
        for r in parsed
        if r["flagged"] == "0"
    ) and all(r["flagged"] == "0" for r in parsed)
    checks.append(
        CheckResult("two-sided-bounds", ok_bounds, f"{len(parsed)} polygon sizes")
    )
    window = cfg.get("gap_ratio_window", [0.3, 0.7])
    gaps = {int(r["n"]): float(r["gap"]) for r in parsed}
    ratios = [
        gaps[b] / gaps[a]
        for a, b in zip(n_values, n_values[1:])
        if b == 2 * a and gaps.get(a, 0) > 0
    ]
    ok_rate = bool(ratios) and all(window[0] <= rho <= window[1] for rho in ratios)
    checks.append(
        CheckResult(
            "gap-contraction",
            ok_rate,
            "ratios " + ", ".join(f"{rho:.3f}" for rho in ratios),
        )
    )
    eps = {int(r["n"]): float(r["eps_forward"]) for r in parsed}
    ewin = cfg.get("eps_ratio_window", [0.35, 0.65])
    eratios = [
        eps[b] / eps[a] for a, b in zip(n_values, n_values[1:]) if b == 2 * a and eps.get(a, 0) > 0
    ]
    checks.append(
        CheckResult(
            "eps-contraction",
            bool(eratios) and all(ewin[0] <= rho <= ewin[1] for rho in eratios),
            "ratios " + ", ".join(f"{rho:.3f}" for rho in eratios),
        )
    )
    return RunOutput(csv=text, svgs={"": plot_polygon_limit(parsed)}, checks=checks)


def plot_polygon_limit(rows: list[dict]) -> str:
    xs = [float(r["n"]) for r in rows]
    series = [
        ("beta_n", xs, [float(r["beta"]) for r in rows]),
        ("lower bound", xs, [float(r["lower_bound"]) for r in rows]),
        ("upper bound", xs, [float(r["upper_bound"]) for r in rows]),
    ]
    return line_plot(series, "polygon edges n", "beta",
                     title="inscribed polygons approaching the disk")


# ----------------------------------------------------------------------
# perturbation rate
# ----------------------------------------------------------------------

def run_perturb_rate(cfg: dict, jobs: int = 1, seed=None) -> RunOutput:
    n_values = [int(n) for n in cfg.get("n_values", [8, 16, 32, 64])]
    grid = int(cfg.get("grid_density", 512))
    ests = _parallel(lambda n: perturb.polygon_disk_eps(n, grid_density=grid), n_values, jobs)
    chash = _cfg_hash(cfg)
    header = [
        "config_hash",
        "n",
        "eps_forward",
        "eps_inverse",
        "eps",
        "jacobian_deviation",
        "neumann_inverse_bound",
        "jacobian_bound_ok",
        "sample_count",
    ]
    rows = []
    for n, est in zip(n_values, ests):
        bound_ok = est.jacobian_deviation <= 2 * est.eps_forward + est.eps_forward**2 + 1e-12
        rows.append(
            [
                chash,
                str(n),
                _g(est.eps_forward),
                _g(est.eps_inverse),
                _g(est.eps),
                _g(est.jacobian_deviation),
                _g(est.neumann_inverse_bound),
                str(int(bound_ok)),
                str(est.sample_count),
            ]
        )
    text = _csv_text(header, rows)
    parsed = _parse_csv(text)
    window = cfg.get("eps_ratio_window", [0.35, 0.65])
    eps = {int(r["n"]): float(r["eps_forward"]) for r in parsed}
    ratios = [
        eps[b] / eps[a] for a, b in zip(n_values, n_values[1:]) if b == 2 * a and eps.get(a, 0) > 0
    ]
    checks = [
        CheckResult(
            "eps-halving",
            bool(ratios) and all(window[0] <= rho <= window[1] for rho in ratios),
            "ratios " + ", ".join(f"{rho:.3f}" for rho in ratios),
        ),
        CheckResult(
            "jacobian-bound",
            all(r["jacobian_bound_ok"] == "1" for r in parsed),
            "sup|1-J| <= 2*eps + eps^2 on every map",
        ),
    ]
    return RunOutput(csv=text, svgs={"": plot_perturb_rate(parsed)}, checks=checks)


def plot_perturb_rate(rows: list[dict]) -> str:
    xs = [float(r["n"]) for r in rows]
    series = [
        ("eps forward", xs, [float(r["eps_forward"]) for r in rows]),
        ("eps inverse", xs, [float(r["eps_inverse"]) for r in rows]),
        ("|1 - J|", xs, [float(r["jacobian_deviation"]) for r in rows]),
    ]
    return line_plot(series, "polygon edges n", "log10 closeness",
                     title="Lipschitz closeness of the polygon maps", log_y=True)


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

_RUNNERS = {
    "single-beta": run_single_beta,
    "sv-sweep": run_sv_sweep,
    "p-sweep": run_p_sweep,
    "h-refinement": run_h_refinement,
    "polygon-limit": run_polygon_limit,
    "perturb-rate": run_perturb_rate,
    "spectrum": run_spectrum,
}

_COMMAND_KINDS = {
    "beta": {"single-beta"},
    "sweep": {"sv-sweep", "p-sweep", "h-refinement"},
    "spectrum": {"spectrum"},
    "polygon": {"polygon-limit"},
    "perturb": {"perturb-rate"},
}


def _write_outputs(prefix: str, out: RunOutput) -> None:
    with open(f"{prefix}.csv", "w", newline="\n") as f:
        f.write(out.csv)
    for suffix, text in sorted(out.extra_csv.items()):
        with open(f"{prefix}_{suffix}.csv", "w", newline="\n") as f:
            f.write(text)
    for suffix, text in sorted(out.svgs.items()):
        name = f"{prefix}.svg" if suffix == "" else f"{prefix}_{suffix}.svg"
        with open(name, "w", newline="\n") as f:
            f.write(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lbblab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMAND_KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output path prefix")
        p.add_argument("--seed", type=int, default=None, help="override the solver seed")
        p.add_argument("--check", action="store_true", help="fail (exit 2) on failed checks")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for sweep points")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as f:
            cfg = json.load(f)
        kind = cfg.get("kind")
        if kind not in _COMMAND_KINDS[args.command]:
            raise ValueError(
                f"config kind {kind!r} not valid for subcommand {args.command!r}"
            )
        prefix = args.out or cfg.get("out") or kind
        out = _RUNNERS[kind](cfg, jobs=max(1, args.jobs), seed=args.seed)
        _write_outputs(prefix, out)
    except Exception as exc:  # computation failure -> exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for check in out.checks:
        print(check.line())
    if args.check and any(not c.passed for c in out.checks):
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
