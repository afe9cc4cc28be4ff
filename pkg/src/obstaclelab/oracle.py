"""Ground truth: closed-form solutions, fine-grid references, convergence
studies and the calibration of the two unspecified constants."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TwoPhaseProfile
from .errors import ConfigurationError, PreconditionError
from .grid import (
    GridSpec,
    SpaceTimeField,
    build_grid,
    fit_exponent,
    load_field,
    save_field,
)
from .kernels import ProbePoint, _phi_profile, cylinder_l2_sq, dyadic_radii
from .penalty import PenaltyFamily
from .solver import SolveConfig, solve

KINDS = ("stationary_two_phase", "caloric_polynomial", "custom_closed_form")


# ----------------------------------------------------------------------------
# closed forms


def stationary_two_phase(x, lambda_plus: float, lambda_minus: float) -> float:
    """(lp/2)(x1)_+^2 - (lm/2)(x1)_-^2 at a single point."""
    x1 = float(np.atleast_1d(x)[0])
    return 0.5 * lambda_plus * max(x1, 0.0) ** 2 - 0.5 * lambda_minus * max(-x1, 0.0) ** 2


@dataclass(frozen=True)
class CaloricCoeffs:
    """p(x) + q t with p(x) = sum quad_j x_j^2 + sum lin_j x_j + const."""

    quad: tuple
    q: float
    lin: tuple = ()
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "quad", tuple(float(a) for a in self.quad))
        object.__setattr__(self, "lin", tuple(float(b) for b in self.lin))
        lap = 2.0 * sum(self.quad)
        if abs(lap - self.q) > 1e-12 * max(1.0, abs(self.q)):
            raise ConfigurationError(f"not caloric: Laplacian of p is {lap:g} but the time coefficient is {self.q:g}")

    def evaluate(self, X, t):
        X = np.asarray(X, dtype=float)
        out = self.const + self.q * np.asarray(t, dtype=float)
        for j, a in enumerate(self.quad):
            if j < X.shape[0]:
                out = out + a * X[j] ** 2
        for j, b in enumerate(self.lin):
            if j < X.shape[0]:
                out = out + b * X[j]
        return out


def caloric_polynomial(x, t, coeffs) -> float:
    """Evaluate p(x) + q t at one point; ``coeffs`` is CaloricCoeffs or a
    mapping with keys quad, q and optionally lin, const."""
    c = coeffs if isinstance(coeffs, CaloricCoeffs) else CaloricCoeffs(**coeffs)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(c.evaluate(x.reshape(-1), t))


def heat_quartic(X, t):
    """x1^4 + 12 x1^2 t + 12 t^2: caloric, and not reproduced exactly by the scheme."""
    x1 = np.asarray(X, dtype=float)[0]
    return x1**4 + 12.0 * x1**2 * t + 12.0 * t * t


def heat_cubic(X, t):
    """x1^3 + 6 x1 t."""
    x1 = np.asarray(X, dtype=float)[0]
    return x1**3 + 6.0 * x1 * t


def harmonic_cubic(X, t):
    """x1^3 - 3 x1 x2^2 (time independent); in 1D it reduces to heat_cubic."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 1:
        return heat_cubic(X, t)
    return X[0] ** 3 - 3.0 * X[0] * X[1] ** 2 + 0.0 * np.asarray(t)


_CUSTOM = {"heat_quartic": heat_quartic, "heat_cubic": heat_cubic, "harmonic_cubic": harmonic_cubic}


class _Slice:
    """The t = 0 slice of an exact solution, usable as an initial datum."""

    def __init__(self, owner):
        self.owner = owner

    def __call__(self, X):
        return self.owner(X, 0.0)

    def to_dict(self):
        return {"exact": self.owner.to_dict(), "t": 0.0}


class _Lateral:
    def __init__(self, owner):
        self.owner = owner

    def __call__(self, X, t):
        return self.owner(X, t)

    def to_dict(self):
        return {"exact": self.owner.to_dict()}


@dataclass(frozen=True)
class ExactSolution:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown exact solution kind {self.kind!r}")
        if self.kind == "caloric_polynomial":
            CaloricCoeffs(**self.params)
        if self.kind == "custom_closed_form" and self.params.get("name") not in _CUSTOM:
            raise ConfigurationError(f"unknown closed form {self.params.get('name')!r}")

    @classmethod
    def two_phase(cls, lambda_plus=2.0, lambda_minus=2.0):
        return cls("stationary_two_phase", {"lambda_plus": float(lambda_plus), "lambda_minus": float(lambda_minus)})

    @classmethod
    def caloric(cls, quad=(1.0,), q=2.0, lin=(), const=0.0):
        return cls("caloric_polynomial", {"quad": tuple(quad), "q": float(q), "lin": tuple(lin), "const": float(const)})

    @classmethod
    def quartic(cls):
        return cls("custom_closed_form", {"name": "heat_quartic"})

    @classmethod
    def closed_form(cls, name: str):
        return cls("custom_closed_form", {"name": name})

    def __call__(self, X, t):
        X = np.asarray(X, dtype=float)
        if self.kind == "stationary_two_phase":
            p = self.params
            return TwoPhaseProfile(p["lambda_plus"], p["lambda_minus"])(X) + 0.0 * np.asarray(t)
        if self.kind == "caloric_polynomial":
            return CaloricCoeffs(**self.params).evaluate(X, t)
        return _CUSTOM[self.params["name"]](X, t)

    @property
    def initial(self):
        return _Slice(self)

    @property
    def lateral(self):
        return _Lateral(self)

    def penalty(self, eps: float) -> PenaltyFamily:
        if self.kind == "stationary_two_phase":
            return PenaltyFamily(self.params["lambda_plus"], self.params["lambda_minus"], eps)
        return PenaltyFamily.validation(eps)

    def solve_config(self, spec: GridSpec, eps: float | None = None, newton_tol: float = 1e-10) -> SolveConfig:
        """Unmollified data and exact lateral values.  For the two-phase profile
        the default eps is lambda h^2 / 2, below which it is a discrete steady state."""
        if eps is None:
            lam = min(self.params.get("lambda_plus", 2.0), self.params.get("lambda_minus", 2.0))
            eps = 0.5 * lam * spec.h**2 if self.kind == "stationary_two_phase" else 1e-3
        # driven by lateral data, so the a priori bound is the closed form's own sup
        ex = self.sample(spec)
        M = max(1.0, float(np.max(np.abs(ex.values[:, ex.grid.ball_mask]))))
        return SolveConfig(spec, self.penalty(eps), self.initial, mollify=False, lateral_bc=self.lateral,
                           newton_tol=newton_tol, M_bound=M)

    def residual(self, X, t, dx: float = 1e-3, dt: float = 1e-4):
        """Delta u - d_t u - rhs by centered differences of the closed form
        (exact for the polynomial kinds up to round-off)."""
        X = np.asarray(X, dtype=float)
        lap = 0.0
        for j in range(X.shape[0]):
            e = np.zeros_like(X)
            e[j] = dx
            lap = lap + (self(X + e, t) - 2 * self(X, t) + self(X - e, t)) / dx**2
        ut = (self(X, t + dt) - self(X, t - dt)) / (2 * dt)
        if self.kind == "stationary_two_phase":
            u = self(X, t)
            rhs = np.where(u > 0, self.params["lambda_plus"], np.where(u < 0, -self.params["lambda_minus"], 0.0))
        else:
            rhs = 0.0
        return lap - ut - rhs

    def sample(self, spec: GridSpec) -> SpaceTimeField:
        return SpaceTimeField.from_function(spec, self, name=self.kind, provenance="analytic")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **{k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}}


# ----------------------------------------------------------------------------
# restriction and reference solves


def restrict(fine: SpaceTimeField, coarse: GridSpec, space: int, time: int) -> SpaceTimeField:
    """Values of a nested finer field at the nodes of ``coarse``."""
    sl = (slice(None, None, time),) + (slice(None, None, space),) * coarse.dim
    vals = fine.values[sl]
    if vals.shape != coarse.shape:
        raise ConfigurationError(f"grids are not nested: {fine.spec} vs {coarse}")
    return SpaceTimeField(coarse, vals, fine.name + "|restricted", "derived")


def _phi_digest(phi) -> object:
    if hasattr(phi, "to_dict"):
        return phi.to_dict()
    arr = np.ascontiguousarray(np.asarray(phi, dtype=float))
    return hashlib.sha256(arr.tobytes()).hexdigest()


def config_hash(cfg: SolveConfig, refine: int = 1) -> str:
    d = cfg.to_dict()
    d["initial"] = _phi_digest(cfg.phi)
    blob = json.dumps({"cfg": d, "refine": refine, "format": 1}, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()


class ReferenceCache:
    """Directory of reference fields keyed by config hash; writes are atomic renames."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def get(self, key: str):
        p = self.path(key)
        return load_field(p) if p.exists() else None

    def put(self, key: str, fld: SpaceTimeField) -> Path:
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".npz.part")
        os.close(fd)
        try:
            save_field(fld, tmp)
            os.replace(tmp, self.path(key))
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return self.path(key)


def fine_grid_reference(cfg: SolveConfig, refine: int = 2, eps_factor: float = 0.1,
                        cache: ReferenceCache | None = None) -> SpaceTimeField:
    """Solve at (h/refine, tau/refine^2, eps*eps_factor) and restrict to cfg's grid."""
    if refine not in (2, 4):
        raise ConfigurationError(f"refine must be 2 or 4 for nested grids, got {refine!r}")
    if not 0 < eps_factor <= 0.1:
        raise ConfigurationError("the reference eps must be at most eps/10")
    key = config_hash(cfg, refine) if cache is not None else None
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    fine_cfg = cfg.replace(grid=cfg.grid.refined(refine), penalty=cfg.penalty.with_eps(cfg.penalty.eps * eps_factor))
    ref = restrict(solve(fine_cfg).field, cfg.grid, refine, refine * refine)
    ref = SpaceTimeField(cfg.grid, ref.values, "u_ref", "derived", {"refine": refine, "eps_ref": fine_cfg.penalty.eps})
    if cache is not None:
        cache.put(key, ref)
    return ref


# ----------------------------------------------------------------------------
# convergence studies

MODES = ("space", "time", "parabolic")


@dataclass
class ConvergenceStudy:
    mode: str
    steps: list  # h for space/parabolic, tau for time
    errors: list
    order: float
    monotone: bool
    exact: bool
    configs: list = field(repr=False, default_factory=list)

    @property
    def flagged(self) -> bool:
        return not self.monotone and not self.exact

    def rows(self) -> list:
        return [{"level": i, "step": s, "error": e} for i, (s, e) in enumerate(zip(self.steps, self.errors))]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "steps": self.steps, "errors": self.errors, "order": self.order,
                "monotone": self.monotone, "exact": self.exact, "flagged": self.flagged}


def _level_spec(base: GridSpec, mode: str, l: int) -> tuple:
    f = 2**l
    if mode == "space":
        return base.with_(h=base.h / f), f, 1
    if mode == "time":
        return base.with_(tau=base.tau / f), 1, f
    return base.refined(f), f, f * f


def convergence_study(base_cfg: SolveConfig, levels: int, target="reference", mode: str = "parabolic",
                      exclude=None, round_off: float = 1e-11) -> ConvergenceStudy:
    """Max-norm errors along a refinement chain and the least-squares order.

    ``target`` is an ExactSolution (errors against the closed form on each
    level's own ball nodes) or ``"reference"`` (errors between consecutive
    levels on the coarser grid).  ``exclude(X) -> bool mask`` removes nodes,
    e.g. the cells around a kink.
    """
    if levels < 3:
        raise ConfigurationError(f"a convergence study needs at least 3 levels, got {levels}")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    if not (isinstance(target, ExactSolution) or target == "reference"):
        raise ConfigurationError("target must be an ExactSolution or 'reference'")
    specs = [_level_spec(base_cfg.grid, mode, l) for l in range(levels)]
    cfgs = [base_cfg.replace(grid=s) for s, _, _ in specs]
    fields = [solve(c).field for c in cfgs]

    def sel(spec):
        g = build_grid(spec)
        m = g.ball_mask.copy()
        if exclude is not None:
            m &= ~np.asarray(exclude(g.coords), dtype=bool)
        return m

    errors = []
    if isinstance(target, ExactSolution):
        for f in fields:
            m = sel(f.spec)
            errors.append(float(np.max(np.abs(f.values - target.sample(f.spec).values)[:, m])))
        steps = [s.h if mode != "time" else s.tau for s, _, _ in specs]
    else:
        for (sa, _, _), fa, fb in zip(specs, fields, fields[1:]):
            fine_s = 2 if mode != "time" else 1
            fine_t = 2 if mode == "time" else (4 if mode == "parabolic" else 1)
            r = restrict(fb, sa, fine_s, fine_t)
            errors.append(float(np.max(np.abs(fa.values - r.values)[:, sel(sa)])))
        steps = [s.h if mode != "time" else s.tau for s, _, _ in specs[:-1]]
    scale = max(1.0, max(float(np.max(np.abs(f.values))) for f in fields))
    exact = all(e <= round_off * scale for e in errors)
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    order = math.inf if exact else fit_exponent(steps, [max(e, 1e-300) for e in errors])
    return ConvergenceStudy(mode, steps, errors, order, monotone, exact, cfgs)


def write_study_csv(study: ConvergenceStudy, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "step", "error"])
        for r in study.rows():
            w.writerow([r["level"], repr(r["step"]), repr(r["error"])])
    return path


def discretization_constant(spec: GridSpec, levels: int = 3, safety: float = 2.0) -> float:
    """C_disc for the epsilon ladder: safety times the max error of a lambda = 0
    solve of the heat quartic on ``spec`` (the scheme's own error at this grid)."""
    ex = ExactSolution.quartic()
    cfg = ex.solve_config(spec)
    f = solve(cfg).field
    m = build_grid(spec).ball_mask
    return safety * float(np.max(np.abs(f.values - ex.sample(spec).values)[:, m]))


# ----------------------------------------------------------------------------
# calibration of C(n) and N(n)


def _calibration_fields(dim: int, cubic: bool = False):
    if dim == 1:
        out = [ExactSolution.caloric((1.0,), 2.0), ExactSolution.caloric((-0.5,), -1.0)]
    else:
        out = [
            ExactSolution.caloric((1.0, -1.0), 0.0),
            ExactSolution.caloric((1.0, 1.0), 4.0),
            ExactSolution.caloric((0.5, 1.5), 4.0),
        ]
    if cubic:
        out += [ExactSolution.closed_form("heat_cubic"), ExactSolution.closed_form("harmonic_cubic")]
    return out


def _calibration_spec(dim: int, h: float) -> GridSpec:
    T = 0.04
    rho = 2.0 if dim == 1 else 1.6
    return GridSpec(dim, rho, h, h * h, T)


def calibrate_hessian_constant(dim: int, h: float = 0.05) -> float:
    """min over smooth caloric quadratics of Phi_e(2h) / |D(D_e u)(z0)|^4 at tau = h^2.

    The minimum makes (Phi_e(r_min)/C)^{1/4} an upper bound on every calibration field.
    """
    spec = _calibration_spec(dim, h)
    z0 = ProbePoint((0.0,) * dim, spec.horizon)
    ratios = []
    for ex in _calibration_fields(dim):
        u = ex.sample(spec)
        hess = np.diag([2.0 * a for a in ex.params["quad"]] + [0.0] * (dim - len(ex.params["quad"])))
        for e in np.eye(dim):
            target = float(np.linalg.norm(hess @ e))
            if target == 0:
                continue
            radii = dyadic_radii(z0.R, spec.h)
            vals, _, _ = _phi_profile(u, z0, e, [radii[-1]])
            ratios.append(vals[0] / target**4)
    if not ratios:
        raise PreconditionError("no calibration field has a nonzero mixed second derivative")
    return float(min(ratios))


def calibrate_monotonicity_constant(dim: int, h: float = 0.05) -> float:
    """max over smooth caloric quadratics and cubics and several probes of the
    raw violation max_r Phi(r) - Phi(R), in units of ||h1||^2 ||h2||^2 / R^{2n+8}."""
    spec = _calibration_spec(dim, h)
    worst = 0.0
    offsets = [0.0, 0.05, 0.1, -0.15]
    for ex in _calibration_fields(dim, cubic=True):
        u = ex.sample(spec)
        for off in offsets:
            x0 = (off,) + (0.0,) * (dim - 1)
            z0 = ProbePoint(x0, spec.horizon)
            R = z0.R
            for e in np.eye(dim):
                radii = dyadic_radii(R, spec.h)
                vals, hp, hm = _phi_profile(u, z0, e, radii)
                n1, _ = cylinder_l2_sq(hp, spec, z0, 2 * R)
                n2, _ = cylinder_l2_sq(hm, spec, z0, 2 * R)
                unit = n1 * n2 / R ** (2 * dim + 8)
                if unit <= 0:
                    continue
                worst = max(worst, (max(vals) - vals[0]) / unit)
    return float(worst)
