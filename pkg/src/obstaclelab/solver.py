"""Backward-Euler / damped-Newton solver for the penalized two-phase problem.

Each time step solves

    (I - tau Delta_h) w + tau f^eps(w) = u^k

on the active (interior, ball-masked) nodes with Dirichlet values elsewhere.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import cg

from .errors import ConfigurationError, NumericError, SolverError
from .grid import GridSpec, SpaceTimeField, build_grid, laplacian_array, time_derivative_array
from .penalty import MollifiedInitial, PenaltyFamily, mollify_initial

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SolveConfig:
    grid: GridSpec
    penalty: PenaltyFamily
    phi: object
    mollify: bool = True
    lateral_bc: object = None
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    M_bound: float | None = None

    def __post_init__(self):
        problems = []
        if not self.newton_tol > 0:
            problems.append("newton_tol must be positive")
        if self.newton_max_iter < 1:
            problems.append("newton_max_iter must be >= 1")
        if self.M_bound is not None and not self.M_bound >= 1:
            problems.append("M_bound must be >= 1")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    @functools.cached_property
    def initial(self) -> MollifiedInitial:
        return mollify_initial(self.phi, self.penalty.eps, build_grid(self.grid), enabled=self.mollify)

    @property
    def m_bound(self) -> float:
        if self.M_bound is not None:
            return float(self.M_bound)
        return max(1.0, float(np.max(np.abs(self.initial.values))))

    def replace(self, **changes) -> "SolveConfig":
        return dataclasses.replace(self, **changes)

    def with_eps(self, eps: float) -> "SolveConfig":
        return self.replace(penalty=self.penalty.with_eps(eps))

    def to_dict(self) -> dict:
        phi = self.phi.to_dict() if hasattr(self.phi, "to_dict") else "sampled"
        bc = self.lateral_bc.to_dict() if hasattr(self.lateral_bc, "to_dict") else (
            "frozen_initial" if self.lateral_bc is None else "custom")
        return {
            "grid": self.grid.to_dict(),
            "penalty": self.penalty.to_dict(),
            "initial": phi,
            "mollify": self.mollify,
            "lateral_bc": bc,
            "newton_tol": self.newton_tol,
            "newton_max_iter": self.newton_max_iter,
            "M_bound": self.M_bound,
        }


@dataclass(eq=False)
class SolveReport:
    field: SpaceTimeField
    newton_iters: list
    max_residual: float
    wall_time: float
    sup_abs: float
    m_bound: float
    m_bound_ok: bool
    fallback_steps: int = 0
    mollifier_radius: float = 0.0
    certified_gap: float = 0.0

    def to_dict(self) -> dict:
        return {
            "newton_iters_total": int(sum(self.newton_iters)),
            "newton_iters_max": int(max(self.newton_iters, default=0)),
            "max_residual": self.max_residual,
            "wall_time": self.wall_time,
            "sup_abs": self.sup_abs,
            "m_bound": self.m_bound,
            "m_bound_ok": self.m_bound_ok,
            "fallback_steps": self.fallback_steps,
            "mollifier_radius": self.mollifier_radius,
            "certified_gap": self.certified_gap,
        }


class Stepper:
    """Assembles the discrete operator once and advances slices in time."""

    def __init__(self, cfg: SolveConfig):
        self.cfg = cfg
        spec = cfg.grid
        self.grid = build_grid(spec)
        self.pf = cfg.penalty
        self.tau, self.h, self.dim = spec.tau, spec.h, spec.dim
        self.act = self.grid.active
        self.n_act = int(self.act.sum())
        self._lap_aa = self._assemble_laplacian()
        self.fallback_steps = 0

    def _assemble_laplacian(self):
        idx = -np.ones(self.grid.shape, dtype=np.int64)
        idx[self.act] = np.arange(self.n_act)
        rows, cols, vals = [], [], []
        c = -2.0 * self.dim / self.h**2
        ai = idx[self.act]
        rows.append(ai)
        cols.append(ai)
        vals.append(np.full(self.n_act, c))
        for ax in range(self.dim):
            for s in (1, -1):
                nb = np.roll(idx, -s, axis=ax)[self.act]
                keep = nb >= 0
                rows.append(ai[keep])
                cols.append(nb[keep])
                vals.append(np.full(keep.sum(), 1.0 / self.h**2))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_act, self.n_act)
        )

    def boundary_values(self, t: float, initial: np.ndarray) -> np.ndarray:
        bc = self.cfg.lateral_bc
        if bc is None:
            return initial
        return np.broadcast_to(np.asarray(bc(self.grid.coords, t), dtype=float), self.grid.shape)

    def residual(self, w, full, state_a):
        full[self.act] = w
        lap = laplacian_array(full, self.h, self.dim)[self.act]
        return w - self.tau * lap + self.tau * self.pf(w) - state_a

    def _linear_solve(self, diag_extra, rhs):
        tau = self.tau
        if self.dim == 1:
            n = self.n_act
            off = -tau / self.h**2
            ab = np.empty((3, n))
            ab[0] = off
            ab[2] = off
            ab[0, 0] = 0.0
            ab[2, -1] = 0.0
            ab[1] = 1.0 + 2.0 * tau / self.h**2 + tau * diag_extra
            return solve_banded((1, 1), ab, rhs)
        J = sp.identity(self.n_act, format="csr") - tau * self._lap_aa + sp.diags(tau * diag_extra)
        dinv = 1.0 / J.diagonal()
        M = sp.diags(dinv)
        tol = self.cfg.newton_tol / 10.0
        x, info = cg(J, rhs, x0=rhs * dinv, rtol=0.0, atol=tol, maxiter=10 * self.n_act, M=M)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
        return x

    def advance(self, state: np.ndarray, t_next: float, initial: np.ndarray):
        """Return (w, newton_iterations, residual, used_fallback)."""
        if not np.all(np.isfinite(state)):
            raise NumericError("non-finite values in the time-step input")
        cfg = self.cfg
        full = np.array(self.boundary_values(t_next, initial), dtype=float)
        state_a = state[self.act]
        w = state_a.copy()
        trace = []
        F = self.residual(w, full, state_a)
        res = float(np.max(np.abs(F))) if F.size else 0.0
        trace.append(res)
        it = 0
        while res > cfg.newton_tol and it < cfg.newton_max_iter:
            d = self._linear_solve(self.pf.derivative(w), -F)
            n0 = np.linalg.norm(F)
            lam = 1.0
            while True:
                w_try = w + lam * d
                F_try = self.residual(w_try, full, state_a)
                if np.linalg.norm(F_try) < n0 or lam < 2.0**-10:
                    break
                lam *= 0.5
            it += 1
            if lam < 2.0**-10:
                break
            w, F = w_try, F_try
            res = float(np.max(np.abs(F)))
            trace.append(res)
        fallback = False
        if res > cfg.newton_tol:
            # linearized fixed point with the Lipschitz shift: a contraction for monotone f
            fallback = True
            shift = np.full(self.n_act, self.pf.lipschitz_constant())
            for _ in range(cfg.newton_max_iter):
                w = w - self._linear_solve(shift, F)
                F = self.residual(w, full, state_a)
                res = float(np.max(np.abs(F)))
                trace.append(res)
                if res <= cfg.newton_tol:
                    break
        if not np.all(np.isfinite(w)):
            raise NumericError("non-finite values produced by the time step")
        if res > cfg.newton_tol:
            raise SolverError(
                f"Newton did not reach tolerance {cfg.newton_tol:g} at t = {t_next:g}: residual {res:.3e}",
                residual=res,
                trace=trace,
            )
        full[self.act] = w
        return full, it, res, fallback


def step(state: np.ndarray, cfg: SolveConfig, t_next: float | None = None) -> np.ndarray:
    """One backward-Euler step from ``state`` to ``t_next`` (default tau)."""
    stepper = Stepper(cfg)
    t_next = cfg.grid.tau if t_next is None else t_next
    w, _, _, _ = stepper.advance(np.asarray(state, dtype=float), t_next, cfg.initial.values)
    return w


def solve(cfg: SolveConfig) -> SolveReport:
    t0 = time.perf_counter()
    stepper = Stepper(cfg)
    grid = stepper.grid
    init = cfg.initial.values
    vals = np.empty(cfg.grid.shape)
    vals[0] = np.where(grid.active, init, stepper.boundary_values(0.0, init))
    iters, max_res, fallbacks = [], 0.0, 0
    for k in range(1, cfg.grid.n_steps + 1):
        try:
            vals[k], it, res, fb = stepper.advance(vals[k - 1], grid.times[k], init)
        except SolverError as exc:
            exc.level = k
            raise
        iters.append(it)
        max_res = max(max_res, res)
        fallbacks += fb
    fld = SpaceTimeField(cfg.grid, vals, "u_eps", "solved")
    sup_abs = float(np.max(np.abs(vals[:, grid.ball_mask])))
    M = cfg.m_bound
    ok = sup_abs <= M + cfg.penalty.eps
    if not ok:
        log.warning("sup|u_eps| = %.4g exceeds M + eps = %.4g", sup_abs, M + cfg.penalty.eps)
    return SolveReport(
        fld, iters, max_res, time.perf_counter() - t0, sup_abs, M, ok, fallbacks,
        cfg.initial.radius, cfg.initial.certified_gap,
    )


# ----------------------------------------------------------------------------
# epsilon ladder and derived checks


@dataclass
class LadderGap:
    eps_a: float
    eps_b: float
    gap: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.gap <= self.bound


@dataclass(eq=False)
class EpsilonLadder:
    reports: list
    gaps: list
    c_disc: float

    @property
    def ok(self) -> bool:
        return all(g.ok for g in self.gaps)


def _solve_eps(args):
    cfg, eps = args
    return solve(cfg.with_eps(eps))


def run_many(cfgs: Sequence[SolveConfig], workers: int = 1) -> list:
    """Solve independent configs, optionally across processes; order preserved."""
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(solve, cfgs))
    return [solve(c) for c in cfgs]


def epsilon_limit(cfg: SolveConfig, eps_ladder: Sequence[float], c_disc: float = 0.0, workers: int = 1) -> EpsilonLadder:
    """Solve along a decreasing eps ladder and bound consecutive sup gaps.

    The bound ``eps_a + eps_b + c_disc`` follows from the sup-norm estimate
    ``sup|u^eps - u| <= eps`` applied to both runs.
    """
    ladder = [float(e) for e in eps_ladder]
    if any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ConfigurationError(f"eps ladder must be strictly decreasing, got {ladder}")
    reports = run_many([cfg.with_eps(e) for e in ladder], workers)
    mask = build_grid(cfg.grid).ball_mask
    gaps = []
    for (ea, ra), (eb, rb) in zip(zip(ladder, reports), zip(ladder[1:], reports[1:])):
        g = float(np.max(np.abs(ra.field.values[:, mask] - rb.field.values[:, mask])))
        gaps.append(LadderGap(ea, eb, g, ea + eb + c_disc))
    return EpsilonLadder(reports, gaps, c_disc)


def initial_time_derivative_check(report: SolveReport, cfg: SolveConfig) -> float:
    """max |d_t u(., 0) + f^eps(phi_eps) - Delta_h phi_eps| over active nodes."""
    v = report.field.values
    spec = cfg.grid
    if spec.n_steps < 2:
        raise ConfigurationError("need at least two time steps")
    dt0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * spec.tau)
    phi = v[0]
    rhs = laplacian_array(phi, spec.h, spec.dim) - cfg.penalty(phi)
    act = build_grid(spec).active
    return float(np.max(np.abs(dt0 - rhs)[act]))


def shell_time_derivative_sup(fld: SpaceTimeField, radius: float, k_min: int = 1) -> float:
    """sup of |backward difference in t| over levels >= k_min and |x| <= radius."""
    g = fld.grid
    mask = g.shell_mask(radius) & g.active
    dt = time_derivative_array(fld.values, fld.spec.tau)[k_min:]
    return float(np.max(np.abs(dt[:, mask])))
