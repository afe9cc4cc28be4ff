"""Experiment orchestration: one function per experiment kind, each producing
PASS/FAIL verdicts, CSV tables, figures and a JSON run report.

Every verdict carries a tag naming the statement it checks.  CSV files hold
no timings and use ``repr`` floats so identical configs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import oracle, plotting, probes
from .config import ExperimentConfig
from .errors import ObstacleLabError, PreconditionError, SolverError
from .free_boundary import classify, decompose, lambda_hessian_check, near_gamma, write_decomposition_csv
from .grid import GridSpec, build_grid, fit_exponent
from .kernels import (
    CutoffProfile,
    ProbePoint,
    kernel_caloric_defect,
    kernel_slice_mass,
    monotonicity_scan,
)
from .solver import (
    SolveConfig,
    epsilon_limit,
    initial_time_derivative_check,
    run_many,
    shell_time_derivative_sup,
    solve,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

# statement tags carried by verdicts
TAGS = {
    "residual": "regularized equation solved to tolerance",
    "sup_bound": "maximum principle: sup|u| <= M",
    "ladder": "regularization error: sup|u^eps - u| <= eps",
    "ut_uniform": "time derivative bounded uniformly in eps",
    "ut_refine": "time derivative bound on the inner shell",
    "subcaloric": "sub-caloricity of (D_e u)+ and (D_e u)-",
    "monotonicity": "almost-monotonicity of the rescaled two-phase functional",
    "grad_gap": "gradient gap to the datum grows at most linearly in R",
    "grad_gap_t0": "initial condition u(., 0) = phi",
    "whe": "heat-weighted Hessian energy is O(R^2)",
    "phi_R": "two-phase functional at scale R is bounded",
    "split": "split norms of D_e u scale like R^(n+4)",
    "dphi": "sup |D_e phi| over B_2R grows at most linearly in R",
    "equation": "equation holds off the zero set",
    "c11": "second derivatives and time derivative bounded up to t = 0",
    "chain": "Hessian bound through the functional and the equation",
    "holder": "half-Holder continuity of Du in time",
    "heat_kernel": "heat kernel normalization and caloricity",
    "cutoff": "scale-invariant cut-off derivative bounds",
    "convergence": "scheme convergence on closed-form solutions",
    "stationary": "stationary two-phase profile is preserved",
}


@dataclass
class Verdict:
    check: str
    tag: str
    value: float | None
    threshold: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["statement"] = TAGS[self.tag]
        d["verdict"] = "PASS" if self.passed else "FAIL"
        return d


@dataclass
class RunResult:
    kind: str
    out_dir: Path
    verdicts: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    error: dict | None = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return self.error is None and all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return 2
        return 0 if self.passed else 1


# ----------------------------------------------------------------------------
# output helpers


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def write_csv(path: Path, header: list, rows: list) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(h)) for h in header])
    return path


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, Path):
        return str(o)
    return o


def _ratio(vals) -> float:
    vals = [float(v) for v in vals]
    lo = min(vals)
    return math.inf if lo <= 0 else max(vals) / lo


def _solve_config(cfg: ExperimentConfig, grid: GridSpec | None = None, eps: float | None = None) -> SolveConfig:
    v = cfg.values
    pf = cfg.penalty if eps is None else cfg.penalty.with_eps(eps)
    return SolveConfig(grid or cfg.grid, pf, cfg.initial, mollify=v["solver.mollify"], newton_tol=v["solver.newton_tol"],
                       newton_max_iter=v["solver.newton_max_iter"], M_bound=v["solver.M_bound"])


def _chain(grid: GridSpec, levels: int) -> list:
    """The configured grid followed by parabolic refinements h/2, h/4, ..."""
    return [grid if l == 0 else grid.refined(2**l) for l in range(levels)]


def _directions(cfg: ExperimentConfig, u, z) -> list:
    given = cfg.values["probe.directions"]
    if given:
        return [tuple(np.asarray(d) / np.linalg.norm(d)) for d in given]
    dirs = probes.choose_directions(u, z).directions
    return dirs or [tuple(r) for r in np.eye(u.spec.dim)]


def _subcaloric_verdicts(field, e, label: str) -> tuple:
    rows, verdicts = [], []
    for i, (sign, bump, w) in enumerate(probes.subcaloric_battery(field, e)):
        rows.append({"field": label, "direction": e, "bump": i // 2, "part": sign, "pairing": w.pairing,
                     "tolerance": w.tolerance, "passed": w.ok})
        verdicts.append(Verdict(f"{label} (D_e u){sign} bump {i // 2}", "subcaloric", w.pairing,
                                f">= -{w.tolerance:.4g}", w.ok))
    return rows, verdicts


# ----------------------------------------------------------------------------
# experiment kinds


def run_solve(cfg: ExperimentConfig, out: Path, res: RunResult, workers: int) -> None:
    sc = _solve_config(cfg)
    rep = solve(sc)
    u = rep.field
    g = u.grid
    tol = sc.newton_tol
    res.verdicts.append(Verdict("max Newton residual", "residual", rep.max_residual, f"<= {tol:g}",
                                rep.max_residual <= tol))
    res.verdicts.append(Verdict("sup |u_eps| over the ball", "sup_bound", rep.sup_abs,
                                f"<= {rep.m_bound + sc.penalty.eps:g}", rep.m_bound_ok))
    iters = [0] + list(rep.newton_iters)
    rows = []
    for k in range(sc.grid.n_steps + 1):
        sl = u.values[k][g.ball_mask]
        rows.append({"k": k, "t": g.times[k], "min": sl.min(), "max": sl.max(), "newton_iters": iters[k]})
    res.files.append(write_csv(out / "levels.csv", ["k", "t", "min", "max", "newton_iters"], rows))
    c = classify(u, scale=cfg.values["classify.scale"])
    counts = decompose(c).counts()
    res.files.append(write_csv(out / "free_boundary_counts.csv", ["k", "gamma", "gamma0", "gamma_star"],
                               [{"k": k, "gamma": a, "gamma0": b, "gamma_star": s} for k, (a, b, s) in enumerate(counts)]))
    res.files.append(write_decomposition_csv(c, out / "zero_set.csv"))
    lh = lambda_hessian_check(u, c)
    res.results.update({
        "solve": rep.to_dict(),
        "initial_time_derivative_defect": initial_time_derivative_check(rep, sc) if sc.grid.n_steps >= 2 else None,
        "zero_set_hessian": asdict(lh),
    })
    res.files.append(plotting.plot_snapshots(u, out / "snapshots.png"))
    res.files.append(plotting.plot_classification(c, out / "classification.png"))


def run_ladder(cfg: ExperimentConfig, out: Path, res: RunResult, workers: int) -> None:
    v = cfg.values
    tol = cfg.tolerances
    ladder = list(v["ladder.eps"])
    c_disc = v["ladder.c_disc"]
    if c_disc is None:
        c_disc = oracle.discretization_constant(cfg.grid)
    sc = _solve_config(cfg)
    lad = epsilon_limit(sc, ladder, c_disc, workers)
    for gp in lad.gaps:
        res.verdicts.append(Verdict(f"gap eps {gp.eps_a:g} vs {gp.eps_b:g}", "ladder", gp.gap, f"<= {gp.bound:.6g}", gp.ok))
    shells = {"B8": cfg.grid.shell_radius("B8"), "B7": cfg.grid.shell_radius("B7")}
    ut_rows = []
    for eps, rep in zip(ladder, lad.reports):
        for name, rad in shells.items():
            ut_rows.append({"series": "eps", "eps": eps, "h": cfg.grid.h, "tau": cfg.grid.tau, "shell": name,
                            "sup_ut": shell_time_derivative_sup(rep.field, rad)})
    for name in shells:
        vals = [r["sup_ut"] for r in ut_rows if r["shell"] == name]
        r = _ratio(vals)
        res.verdicts.append(Verdict(f"sup|d_t u| on {name} across eps", "ut_uniform", r,
                                    f"<= {tol['eps_ratio']:g}", r <= tol["eps_ratio"]))
    levels = v["refine.levels"]
    if levels >= 2:
        chain = _chain(cfg.grid, levels)
        reps = [lad.reports[0]] + run_many([_solve_config(cfg, gr, ladder[0]) for gr in chain[1:]], workers)
        for gr, rep in zip(chain, reps):
            for name in shells:
                ut_rows.append({"series": "refine", "eps": ladder[0], "h": gr.h, "tau": gr.tau, "shell": name,
                                "sup_ut": shell_time_derivative_sup(rep.field, gr.shell_radius(name))})
        for name in shells:
            vals = [r["sup_ut"] for r in ut_rows if r["shell"] == name and r["series"] == "refine"]
            r = _ratio(vals)
            res.verdicts.append(Verdict(f"sup|d_t u| on {name} across {levels} grids", "ut_refine", r,
                                        f"<= {tol['refinement_ratio']:g}", r <= tol["refinement_ratio"]))
    gap_rows = [{"eps_a": g.eps_a, "eps_b": g.eps_b, "gap": g.gap, "bound": g.bound, "passed": g.ok} for g in lad.gaps]
    res.files.append(write_csv(out / "ladder_gaps.csv", ["eps_a", "eps_b", "gap", "bound", "passed"], gap_rows))
    res.files.append(write_csv(out / "ladder_time_derivative.csv", ["series", "eps", "h", "tau", "shell", "sup_ut"], ut_rows))
    res.results.update({
        "c_disc": c_disc,
        "reports": [r.to_dict() for r in lad.reports],
        "initial_time_derivative_defect": {repr(e): initial_time_derivative_check(r, sc.with_eps(e))
                                           for e, r in zip(ladder, lad.reports)},
    })
    if lad.gaps:
        res.files.append(plotting.plot_ladder(lad.gaps, out / "ladder.png"))


def run_monotonicity(cfg: ExperimentConfig, out: Path, res: RunResult, workers: int) -> None:
    v = cfg.values
    rep = solve(_solve_config(cfg))
    u = rep.field
    radii = list(v["probe.radii"]) or None
    scans, rows = [], []
    for z in sorted(cfg.probes, key=lambda z: z.key):
        for e in _directions(cfg, u, z):
            m = monotonicity_scan(u, z, e, radii, shell=v["probe.shell"])
            scans.append(m)
            res.verdicts.append(Verdict(f"x0={z.x0} t0={z.t0:g} e={tuple(round(float(c), 6) + 0.0 for c in e)}", "monotonicity",
                                        m.worst_violation, f"<= tol_disc {m.tol_disc:.4g}", m.passed))
            for r in m.rows():
                rows.append({"x0": z.x0, "t0": z.t0, "e": m.direction, **r})
    res.files.append(write_csv(out / "monotonicity.csv", ["x0", "t0", "e", "r", "phi_e", "bound", "margin"], rows))
    e0 = tuple(np.eye(cfg.grid.dim)[0])
    sub_rows, sub_v = _subcaloric_verdicts(u, e0, "solved")
    res.verdicts.extend(sub_v)
    res.files.append(write_csv(out / "subcaloric.csv", ["field", "direction", "bump", "part", "pairing", "tolerance",
                                                         "passed"], sub_rows))
    res.results.update({"solve": rep.to_dict(), "scans": [m.to_dict() for m in scans],
                        "probe_count": len({z.key for z in cfg.probes})})
    res.files.append(plotting.plot_phi_profiles(scans, out / "phi_profiles.png"))
    res.files.append(plotting.plot_snapshots(u, out / "snapshots.png"))


def _near_probe(c, z, u, cells: int = 2) -> bool:
    g = u.grid
    k0 = g.level_of(z.t0)
    near = near_gamma(c, cells)[k0]
    return bool(near[g.node_of(z.x0)])


def run_sweep(cfg: ExperimentConfig, out: Path, res: RunResult, workers: int) -> None:
    v = cfg.values
    tol = cfg.tolerances
    n = cfg.grid.dim
    scale = v["classify.scale"]
    chain = _chain(cfg.grid, v["refine.levels"])
    sc0 = _solve_config(cfg)
    reps = run_many([sc0.replace(grid=gr) for gr in chain], workers)
    centers = list(v["probe.centers"])
    fit_rows, scan_rows, chain_rows = [], [], []
    pooled = {c: {"whe": [], "phi": []} for c in centers}
    scans = []
    for lvl, (gr, rep) in enumerate(zip(chain, reps)):
        u = rep.field
        c = classify(u, scale=scale)
        for center in centers:
            zs = [z for z in cfg.probes if z.x0 == tuple(center)]
            fits = probes.regularity_sweep(u, zs, cfg.penalty, scale=scale)
            for row in fits.rows():
                fit_rows.append({"level": lvl, "h": gr.h, "center": center, **row})
            tag = f"level {lvl} x0={center}"
            gaps = [r.grad_gap for r in fits.reports]
            if fits.grad_gap_slope is None:
                ok = all(g0 <= 1e-12 for g0 in gaps)
                res.verdicts.append(Verdict(f"{tag} gradient gap slope", "grad_gap", None, "gap identically 0", ok))
            else:
                res.verdicts.append(Verdict(f"{tag} gradient gap slope", "grad_gap", fits.grad_gap_slope,
                                            f">= {tol['slope_min']:g}", fits.grad_gap_slope >= tol["slope_min"]))
            s0 = max(r.slice0_gap for r in fits.reports)
            res.verdicts.append(Verdict(f"{tag} gradient gap at t = 0", "grad_gap_t0", s0, "== 0", s0 == 0.0))
            for name, ex in (("positive", fits.split_exponent_pos), ("negative", fits.split_exponent_neg)):
                if ex is not None:
                    res.verdicts.append(Verdict(f"{tag} split norm exponent ({name} part)", "split", ex,
                                                f"in [{n + 3}, {n + 5}]", n + 3 <= ex <= n + 5))
            if fits.dphi_slope is not None:
                res.verdicts.append(Verdict(f"{tag} sup|D_e phi| slope", "dphi", fits.dphi_slope,
                                            f">= {tol['slope_min']:g}", fits.dphi_slope >= tol["slope_min"]))
            for r in fits.reports:
                pooled[center]["whe"].append(r.weighted_hessian_energy / r.probe.R**2)
                if r.phi_e_R is not None:
                    pooled[center]["phi"].append(r.phi_e_R)
                row = {"level": lvl, "center": center, "t0": r.probe.t0}
                if _near_probe(c, r.probe, u):
                    chain_rows.append({**row, "skipped": "probe within two cells of the free boundary"})
                    continue
                try:
                    hc = probes.hessian_bound_chain(u, r.probe, cfg.penalty)
                except PreconditionError as exc:
                    chain_rows.append({**row, "skipped": str(exc)})
                    continue
                chain_rows.append({**row, "assembled": hc.assembled, "direct": hc.direct, "ratio": hc.ratio})
                f = tol["chain_factor"]
                res.verdicts.append(Verdict(f"{tag} t0={r.probe.t0:g} assembled/direct", "chain", hc.ratio,
                                            f"in [1/{f:g}, {f:g}]", 1 / f <= hc.ratio <= f))
        ts = probes.theorem_sup_scan(u, classification=c, scale=scale)
        hq = probes.holder_half_check(u)
        eq = probes.equation_consistency(u, cfg.penalty)
        res.verdicts.append(Verdict(f"level {lvl} equation residual off the zero set", "equation", eq,
                                    f"<= h + tau = {gr.h + gr.tau:.4g}", eq <= gr.h + gr.tau))
        scans.append({"level": lvl, "h": gr.h, "tau": gr.tau, "hessian_sup": ts.hessian_sup, "ut_sup": ts.ut_sup,
                      "holder": hq.quotient, "near_gamma_hessian_sup": ts.near_gamma_hessian_sup,
                      "excluded_nodes": ts.excluded_nodes, "equation_residual": eq,
                      "hessian_argmax": ts.hessian_argmax, "ut_argmax": ts.ut_argmax})
        if lvl == 0:
            sub_rows, sub_v = _subcaloric_verdicts(u, tuple(np.eye(n)[0]), "solved")
            res.verdicts.extend(sub_v)
            res.files.append(write_csv(out / "subcaloric.csv", ["field", "direction", "bump", "part", "pairing",
                                                                 "tolerance", "passed"], sub_rows))
        lvl_dir = out / f"level_{lvl}"
        res.files.append(write_csv(lvl_dir / "regularity.csv", ["center", "R", "quantity", "value", "fitted_exponent"],
                                   [r for r in fit_rows if r["level"] == lvl]))
    for center, p in pooled.items():
        r = _ratio(p["whe"])
        res.verdicts.append(Verdict(f"x0={center} weighted Hessian energy / R^2 spread", "whe", r,
                                    f"<= {tol['magnitude_ratio']:g}", r <= tol["magnitude_ratio"]))
        if p["phi"]:
            r = _ratio(p["phi"])
            res.verdicts.append(Verdict(f"x0={center} Phi_e(R) spread", "phi_R", r,
                                        f"<= {tol['magnitude_ratio']:g}", r <= tol["magnitude_ratio"]))
    if len(chain) >= 2:
        rr = tol["refinement_ratio"]
        for key, tg in (("hessian_sup", "c11"), ("ut_sup", "c11"), ("holder", "holder")):
            r = _ratio([s[key] for s in scans])
            res.verdicts.append(Verdict(f"{key} across {len(chain)} grids", tg, r, f"<= {rr:g}", r <= rr))
    res.files.append(write_csv(out / "regularity.csv",
                               ["level", "h", "center", "R", "quantity", "value", "fitted_exponent"], fit_rows))
    res.files.append(write_csv(out / "theorem_scan.csv",
                               ["level", "h", "tau", "hessian_sup", "ut_sup", "holder", "near_gamma_hessian_sup",
                                "excluded_nodes", "equation_residual", "hessian_argmax", "ut_argmax"], scans))
    res.files.append(write_csv(out / "hessian_chain.csv",
                               ["level", "center", "t0", "assembled", "direct", "ratio", "skipped"], chain_rows))
    res.results.update({"theorem_scan": scans, "solves": [r.to_dict() for r in reps]})
    plot_rows = [{**r, "series": f"L{r['level']} x0={r['center']}"} for r in fit_rows]
    res.files.append(plotting.plot_scaling(plot_rows, out / "scaling.png"))


def _exact_for(cfg: ExperimentConfig) -> oracle.ExactSolution:
    k = cfg.values["exact.kind"]
    if k == "stationary_two_phase":
        return oracle.ExactSolution.two_phase(cfg.penalty.lambda_plus, cfg.penalty.lambda_minus)
    if k == "caloric_polynomial":
        quad = (1.0,) * cfg.grid.dim
        return oracle.ExactSolution.caloric(quad, 2.0 * sum(quad))
    return oracle.ExactSolution.quartic()


def run_convergence(cfg: ExperimentConfig, out: Path, res: RunResult, workers: int) -> None:
    v = cfg.values
    tol = cfg.tolerances
    mode, levels = v["convergence.mode"], v["convergence.levels"]
    if v["convergence.target"] == "exact":
        ex = _exact_for(cfg)
        eps = None
        if ex.kind == "stationary_two_phase":
            h_min = cfg.grid.h / (2 ** (levels - 1) if mode != "time" else 1)
            eps = 0.5 * min(cfg.penalty.lambda_plus, cfg.penalty.lambda_minus) * h_min**2
        base = ex.solve_config(cfg.grid, eps, v["solver.newton_tol"])
        target = ex
    else:
        base, target = _solve_config(cfg), "reference"
    cells = v["convergence.exclude_cells"]
    exclude = (lambda X: np.abs(X[0]) <= cells * cfg.grid.h) if cells > 0 else None
    st = oracle.convergence_study(base, levels, target, mode, exclude)
    need = tol["order_time"] if mode == "time" else tol["order_space"]
    res.verdicts.append(Verdict(f"fitted order ({mode})", "convergence", st.order, f">= {need:g}, monotone decay",
                                st.order >= need and not st.flagged,
                                "errors at round-off on every level" if st.exact else ""))
    res.files.append(oracle.write_study_csv(st, out / "convergence.csv"))
    res.results["study"] = st.to_dict()
    res.files.append(plotting.plot_convergence(st, out / "convergence.png"))


def validation_checks(dim: int, tol: dict, newton_tol: float = 1e-10) -> tuple:
    """Kernel, cut-off, solver and sub-caloricity checks on fixed grids.

    Returns (verdicts, summary rows, sub-caloricity rows, results)."""
    verdicts, rows = [], []
    mass_spec = GridSpec(dim, 10.0, 0.05, 0.05, 1.0)
    for t in (0.05, 0.1, 0.25, 0.5, 1.0):
        m = kernel_slice_mass(mass_spec, t)
        ok = abs(m - 1.0) <= tol["kernel_mass"]
        verdicts.append(Verdict(f"kernel mass at t = {t:g}", "heat_kernel", m, f"1 +- {tol['kernel_mass']:g}", ok))
        rows.append({"check": f"kernel_mass_t{t:g}", "value": m, "passed": ok})
    hs = [0.1, 0.05, 0.025]
    defects = [kernel_caloric_defect(dim, h, 0.25) for h in hs]
    order = fit_exponent(hs, defects)
    ok = order >= tol["caloric_order"]
    verdicts.append(Verdict("kernel caloricity defect order", "heat_kernel", order, f">= {tol['caloric_order']:g}", ok))
    rows.append({"check": "kernel_defect_order", "value": order, "passed": ok})
    consts = [CutoffProfile((0.0,) * dim, r).realized_constants() for r in (0.1, 0.2, 0.4)]
    digits = tol["cutoff_digits"]
    for j, name in enumerate(("sup r|D xi|", "sup r^2|Delta xi|")):
        vals = [c[j] for c in consts]
        spread = (max(vals) - min(vals)) / max(abs(min(vals)), 1e-300)
        ok = spread <= 10.0 ** (-digits)
        verdicts.append(Verdict(f"cut-off {name} across r in 0.1, 0.2, 0.4", "cutoff", spread,
                                f"<= 1e-{digits}", ok))
        rows.append({"check": f"cutoff_{j}", "value": vals[0], "passed": ok})
    quart = oracle.ExactSolution.quartic()
    t_spec = GridSpec(1, 1.0, 0.005, 0.004, 0.2)
    st_t = oracle.convergence_study(quart.solve_config(t_spec, newton_tol=newton_tol), 3, quart, "time")
    ok = st_t.order >= tol["order_time"] and not st_t.flagged
    verdicts.append(Verdict("caloric solve order in tau", "convergence", st_t.order, f">= {tol['order_time']:g}", ok))
    rows.append({"check": "order_tau", "value": st_t.order, "passed": ok})
    s_spec = GridSpec(1, 1.0, 0.1, 0.004, 0.2)
    st_h = oracle.convergence_study(quart.solve_config(s_spec, newton_tol=newton_tol), 3, quart, "parabolic")
    ok = st_h.order >= tol["order_space"] and not st_h.flagged
    verdicts.append(Verdict("caloric solve order in h (tau = O(h^2))", "convergence", st_h.order,
                            f">= {tol['order_space']:g}", ok))
    rows.append({"check": "order_h", "value": st_h.order, "passed": ok})
    tp = oracle.ExactSolution.two_phase(2.0, 2.0)
    sp_spec = GridSpec(dim, 2.0, 0.05, 0.0025, 0.1)
    sp = solve(tp.solve_config(sp_spec, newton_tol=newton_tol)).field
    m = build_grid(sp_spec).ball_mask
    drift = float(np.max(np.abs(sp.values - sp.values[0])[:, m]))
    bound = 10 * newton_tol + sp_spec.h**2
    verdicts.append(Verdict("stationary two-phase drift", "stationary", drift, f"<= {bound:.4g}", drift <= bound))
    rows.append({"check": "stationary_drift", "value": drift, "passed": drift <= bound})
    an_spec = GridSpec(dim, 2.0, 0.05, 0.0025, 0.2)
    sub_rows = []
    analytic = [("two_phase", tp.sample(an_spec))]
    quad = (1.0, -1.0) if dim == 2 else (1.0,)
    analytic.append(("caloric", oracle.ExactSolution.caloric(quad, 2.0 * sum(quad)).sample(an_spec)))
    for label, fld in analytic:
        for e in np.eye(dim):
            r, vv = _subcaloric_verdicts(fld, tuple(e), label)
            sub_rows += r
            verdicts += vv
    results = {"caloric_orders": [st_t.to_dict(), st_h.to_dict()], "kernel_defects": defects,
               "cutoff_constants": consts}
    return verdicts, rows, sub_rows, results


def run_validate(cfg: ExperimentConfig, out: Path, res: RunResult, workers: int) -> None:
    verdicts, rows, sub_rows, results = validation_checks(cfg.grid.dim, cfg.tolerances, cfg.values["solver.newton_tol"])
    res.verdicts.extend(verdicts)
    res.results.update(results)
    res.results["c_disc"] = oracle.discretization_constant(cfg.grid)
    res.files.append(write_csv(out / "validate.csv", ["check", "value", "passed"], rows))
    res.files.append(write_csv(out / "subcaloric.csv", ["field", "direction", "bump", "part", "pairing", "tolerance",
                                                         "passed"], sub_rows))


RUNNERS = {
    "solve": run_solve,
    "epsilon-ladder": run_ladder,
    "monotonicity": run_monotonicity,
    "regularity-sweep": run_sweep,
    "convergence": run_convergence,
    "validate": run_validate,
}


def run(cfg: ExperimentConfig, out=None, workers: int | None = None) -> RunResult:
    """Run one experiment, write its artifacts and report; never raises for
    package errors (they become a structured error report and exit code 2)."""
    out = Path(out) if out is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    workers = cfg.values["run.workers"] if workers is None else workers
    res = RunResult(cfg.kind, out)
    t0 = time.perf_counter()
    try:
        RUNNERS[cfg.kind](cfg, out, res, workers)
    except ObstacleLabError as exc:
        res.error = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, SolverError):
            res.error.update({"residual": exc.residual, "trace": exc.trace, "level": exc.level})
        log.error("%s failed: %s", cfg.kind, exc)
    res.wall_time = time.perf_counter() - t0
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "config": cfg.to_dict(),
        "passed": res.passed,
        "exit_code": res.exit_code,
        "verdicts": [v.to_dict() for v in res.verdicts],
        "results": res.results,
        "error": res.error,
        "files": sorted(str(Path(f).relative_to(out)) for f in res.files),
        "timings": {"wall_time": res.wall_time},
    }
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    if res.error is not None:
        (out / "error.json").write_text(json.dumps(_jsonable(res.error), indent=2, sort_keys=True) + "\n")
    return res


def summary_lines(res: RunResult) -> list:
    lines = [f"{'PASS' if v.passed else 'FAIL'}  [{v.tag}] {v.check}: {_cell(v.value)} ({v.threshold})"
             for v in res.verdicts]
    if res.error is not None:
        lines.append(f"ERROR {res.error['type']}: {res.error['message']}")
    return lines
