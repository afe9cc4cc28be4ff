"""Grid-level checks of the regularity estimates near the initial state.

Every quantity here is evaluated at a probe z0 = (x0, t0) with parabolic
scale R = sqrt(t0), so the backward cylinder Q_R(z0) reaches t = 0 exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PreconditionError
from .free_boundary import THETA_G, THETA_U, Classification, classify, near_gamma
from .grid import (
    GridIndex,
    GridSpec,
    SpaceTimeField,
    build_grid,
    directional_derivative,
    fit_exponent,
    grad_array,
    gradient,
    hessian,
    hessian_norm_array,
    laplacian_array,
    time_derivative,
    time_derivative_array,
)
from .kernels import (
    CutoffProfile,
    ProbePoint,
    _phi_profile,
    check_probe,
    cutoff_profile,
    cylinder_l2_sq,
    dyadic_radii,
    heat_weighted_integral,
)
from .penalty import PenaltyFamily, exact_rhs

# C(n) in C |D(D_e u)(z0)|^4 <= lim Phi_e(r); calibrated on caloric quadratics
# at tau = h^2 (oracle.calibrate_hessian_constant gives 0.107 to 0.115 for
# h in {0.05, 0.025}) and frozen at a rounded-down value.
HESSIAN_CONSTANT = {1: 0.1, 2: 0.1}

# tol_weak = WEAK_CONSTANT (h + tau) ||psi||_{C^2}
WEAK_CONSTANT = 1.0


@dataclass
class DirectionChoice:
    nu: tuple | None
    directions: list
    equation_route: bool
    grad: tuple


def choose_directions(u: SpaceTimeField, z0: ProbePoint, theta_g: float | None = None) -> DirectionChoice:
    """nu = Du(z0)/|Du(z0)| and an orthonormal set of e perpendicular to nu.

    With |Du(z0)| <= theta_g every coordinate direction is admissible.  In 1D
    with a nonzero gradient no perpendicular direction exists and the second
    derivative must come from the equation instead.
    """
    g = u.grid
    n = u.spec.dim
    theta_g = THETA_G * u.spec.h if theta_g is None else theta_g
    du = gradient(u, GridIndex(g.level_of(z0.t0), g.node_of(z0.x0)))
    norm = float(np.linalg.norm(du))
    if norm <= theta_g:
        return DirectionChoice(None, [tuple(row) for row in np.eye(n)], False, tuple(du))
    nu = du / norm
    if n == 1:
        return DirectionChoice(tuple(nu), [], True, tuple(du))
    return DirectionChoice(tuple(nu), [(-nu[1], nu[0])], False, tuple(du))


@dataclass
class GradientGap:
    sup_gap: float
    energy_gap: float
    slice0_gap: float


def gradient_gap(u: SpaceTimeField, z0: ProbePoint, phi: np.ndarray | None = None) -> GradientGap:
    """sup over t in (0, t0], x in B_2R(x0) of |Du - Dphi|, and
    int_{B_3R(x0)} |D(u - phi)|^2 dx at t = t0.

    ``phi`` defaults to the initial slice of u (the regularized datum).
    """
    spec = u.spec
    check_probe(spec, z0, "B7", factor=3.0)
    g = u.grid
    k0 = g.level_of(z0.t0)
    phi = u.values[0] if phi is None else np.asarray(phi)
    dphi = grad_array(phi, spec.h, spec.dim)
    du = grad_array(u.values[: k0 + 1], spec.h, spec.dim)
    diff = np.sqrt(np.sum((du - dphi[:, None]) ** 2, axis=0))
    b2 = g.shell_mask(2 * z0.R, z0.x0) & g.active
    b3 = g.shell_mask(3 * z0.R, z0.x0) & g.ball_mask
    sup_gap = float(np.max(diff[1:, b2])) if k0 >= 1 else 0.0
    energy = float(np.sum((g.weights * diff[k0] ** 2)[b3]))
    return GradientGap(sup_gap, energy, float(np.max(diff[0, b2])))


def weighted_hessian_energy(u: SpaceTimeField, z0: ProbePoint, cap: bool = True) -> float:
    """int_0^{R^2} int |D^2 u|^2 zeta_R^2 G(x - x0, t0 - t) dx dt."""
    spec = u.spec
    k0 = u.grid.level_of(z0.t0)
    zeta = CutoffProfile(z0.x0, z0.R).values_on(spec)
    hn = hessian_norm_array(u.values[: k0 + 1], spec.h, spec.dim)
    dens = hn**2 * zeta**2
    val, _ = heat_weighted_integral(dens, spec, z0, z0.t0 - z0.R**2, z0.t0, cap)
    return val


def split_norms(u: SpaceTimeField, z0: ProbePoint, e) -> tuple:
    """(||(D_e u)_+||^2, ||(D_e u)_-||^2) over Q_2R(z0) clipped to t >= 0, and the clip flag."""
    spec = u.spec
    check_probe(spec, z0, "B7", factor=2.0)
    k0 = u.grid.level_of(z0.t0)
    de = directional_derivative(u.values[: k0 + 1], spec.h, spec.dim, e)
    p, clipped = cylinder_l2_sq(np.maximum(de, 0.0), spec, z0, 2 * z0.R)
    m, _ = cylinder_l2_sq(np.maximum(-de, 0.0), spec, z0, 2 * z0.R)
    return p, m, clipped


@dataclass
class HessianChain:
    directions: list
    phi_smallest: list  # per direction: Phi_e at the three smallest radii
    radii_smallest: list
    bounds: list  # per direction: (Phi_e(r_min)/C)^(1/4)
    nu: tuple | None
    dnn_bound: float | None
    assembled: float
    direct: float

    @property
    def ratio(self) -> float:
        return self.assembled / self.direct if self.direct > 0 else math.inf


def hessian_bound_chain(u: SpaceTimeField, z0: ProbePoint, pf: PenaltyFamily, c_const: float | None = None,
                        theta_u: float | None = None, theta_g: float | None = None) -> HessianChain:
    """Bound |D^2 u(z0)| through the monotonicity functional and the equation.

    For each e perpendicular to nu, |D(D_e u)(z0)| <= (Phi_e(r_min)/C)^{1/4}
    with r_min the smallest dyadic radius >= 2h.  D_nu D_nu u comes from
    d_t u + f(u) - sum_e D_ee u, bounded by the triangle inequality.
    """
    spec = u.spec
    g = u.grid
    k0, node = g.level_of(z0.t0), g.node_of(z0.x0)
    theta_u = THETA_U * spec.h**2 if theta_u is None else theta_u
    u0 = float(u.values[(k0,) + node])
    if abs(u0) <= theta_u:
        raise PreconditionError(f"|u(z0)| = {abs(u0):.3e} <= theta_u; the probe lies in the zero set")
    C = HESSIAN_CONSTANT[spec.dim] if c_const is None else c_const
    dirs = choose_directions(u, z0, theta_g)
    radii = dyadic_radii(z0.R, spec.h)
    small = radii[-3:]
    phis, bounds = [], []
    for e in dirs.directions:
        vals, _, _ = _phi_profile(u, z0, np.asarray(e), small)
        phis.append(vals)
        bounds.append((max(vals[-1], 0.0) / C) ** 0.25)
    idx = GridIndex(k0, node)
    direct = float(np.linalg.norm(hessian(u, idx)))
    if dirs.nu is None:
        dnn = None
        assembled = math.sqrt(sum(b * b for b in bounds))
    else:
        eq = abs(time_derivative(u, idx) + float(pf(u0)))
        dnn = eq + sum(bounds)
        assembled = math.sqrt(2 * sum(b * b for b in bounds) + dnn * dnn)
    return HessianChain(dirs.directions, phis, small, bounds, dirs.nu, dnn, assembled, direct)


@dataclass
class TheoremScan:
    hessian_sup: float
    ut_sup: float
    hessian_argmax: tuple
    ut_argmax: tuple
    near_gamma_hessian_sup: float
    excluded_nodes: int


def _loc(g, k, spatial):
    return (float(g.times[k]),) + tuple(float(g.axis[j]) for j in spatial)


def theorem_sup_scan(u: SpaceTimeField, radius: float | None = None, classification: Classification | None = None,
                     scale: float = 1.0) -> TheoremScan:
    """sup |D^2 u| (nodes within one cell of Gamma excluded) and sup |d_t u|
    over B_radius x (0, T]; radius defaults to the innermost shell."""
    spec = u.spec
    g = u.grid
    radius = spec.shell_radius(len(spec.shell_fractions) - 1) if radius is None else radius
    c = classify(u, scale=scale) if classification is None else classification
    region = np.broadcast_to(g.shell_mask(radius) & g.active, u.values.shape).copy()
    region[0] = False
    near = near_gamma(c, 1)
    hn = hessian_norm_array(u.values, spec.h, spec.dim)
    keep = region & ~near
    hk = np.where(keep, hn, -1.0)
    ih = np.unravel_index(int(np.argmax(hk)), hk.shape)
    ut = np.abs(time_derivative_array(u.values, spec.tau))
    uk = np.where(region, ut, -1.0)
    iu = np.unravel_index(int(np.argmax(uk)), uk.shape)
    near_sel = region & near
    return TheoremScan(
        float(hk[ih]), float(uk[iu]), _loc(g, ih[0], ih[1:]), _loc(g, iu[0], iu[1:]),
        float(np.max(hn[near_sel])) if near_sel.any() else 0.0, int(near_sel.sum()),
    )


@dataclass
class HolderCheck:
    quotient: float
    location: tuple
    pairs: int


def holder_half_check(u: SpaceTimeField, radius: float | None = None, max_lag: int | None = None) -> HolderCheck:
    """max |Du(x, t) - Du(x, s)| / |t - s|^{1/2} over dyadic lags t - s."""
    spec = u.spec
    g = u.grid
    radius = spec.shell_radius(len(spec.shell_fractions) - 1) if radius is None else radius
    mask = g.shell_mask(radius) & g.active
    du = grad_array(u.values, spec.h, spec.dim)[:, :, mask]
    K = spec.n_steps
    max_lag = K if max_lag is None else min(max_lag, K)
    best, where, pairs = 0.0, (), 0
    m = 1
    while m <= max_lag:
        d = np.sqrt(np.sum((du[:, m:] - du[:, :-m]) ** 2, axis=0)) / math.sqrt(m * spec.tau)
        j = np.unravel_index(int(np.argmax(d)), d.shape)
        pairs += d.size
        if d[j] > best:
            node = tuple(int(a[j[1]]) for a in np.nonzero(mask))
            best = float(d[j])
            where = (float(g.times[j[0] + m]), float(g.times[j[0]])) + tuple(float(g.axis[i]) for i in node)
        m *= 2
    return HolderCheck(best, where, pairs)


def equation_consistency(u: SpaceTimeField, pf: PenaltyFamily, theta_u: float | None = None) -> float:
    """max |Delta_h u - d_t u - f(u)| over active nodes, k >= 1, with |u| beyond the penalty band."""
    spec = u.spec
    theta = max(THETA_U * spec.h**2 if theta_u is None else theta_u, pf.eps)
    v = u.values
    res = laplacian_array(v, spec.h, spec.dim) - time_derivative_array(v, spec.tau) - exact_rhs(pf, v)
    sel = np.broadcast_to(u.grid.active, v.shape) & (np.abs(v) > theta)
    sel[0] = False
    return float(np.max(np.abs(res[sel]))) if sel.any() else 0.0


def directional_datum_sup(phi: np.ndarray, spec: GridSpec, z0: ProbePoint, e) -> float:
    """sup over B_2R(x0) of |D_e phi|."""
    g = build_grid(spec)
    de = directional_derivative(np.asarray(phi), spec.h, spec.dim, e)
    return float(np.max(np.abs(de[g.shell_mask(2 * z0.R, z0.x0) & g.active])))


# ----------------------------------------------------------------------------
# weak sub-caloricity


@dataclass(frozen=True)
class Bump:
    """psi(x, t) = xi(|x - center|/radius) xi(|t - t_center|/t_width) >= 0, C^2."""

    center: tuple
    radius: float
    t_center: float
    t_width: float

    def sample(self, spec: GridSpec):
        g = build_grid(spec)
        cz = CutoffProfile(self.center, self.radius)
        xs, _, _ = cz.evaluate(g.coords)
        s = np.abs(g.times - self.t_center) / self.t_width
        ts, dts, _ = cutoff_profile(s)
        dts = dts * np.sign(g.times - self.t_center) / self.t_width
        psi = ts[:, None] * xs[None] if spec.dim == 1 else ts[:, None, None] * xs[None]
        dpsi_t = dts.reshape((-1,) + (1,) * spec.dim) * xs[None]
        return psi, dpsi_t

    def c2_norm(self, spec: GridSpec) -> float:
        cz = CutoffProfile(self.center, self.radius)
        c1, c2 = cz.realized_constants()
        _, d1, d2 = cutoff_profile(np.linspace(1, 2, 2001))
        return 1.0 + c1 / self.radius + max(c2, float(np.max(np.abs(d2)))) / self.radius**2 \
            + float(np.max(np.abs(d1))) / self.t_width


def default_bump_battery(spec: GridSpec) -> list:
    """Five fixed bumps inside the B8 shell, supported in t in (0, T)."""
    rho, T = spec.radius, spec.horizon
    r8 = spec.shell_radius(2) if len(spec.shell_fractions) > 2 else 0.8 * rho
    s = r8 / 5.0
    n = spec.dim
    def pt(a, b=0.0):
        return (a,) if n == 1 else (a, b)
    return [
        Bump(pt(0.0, 0.0), s, 0.5 * T, 0.2 * T),
        Bump(pt(0.5 * s, -0.5 * s), s, 0.3 * T, 0.12 * T),
        Bump(pt(-s, 0.5 * s), 0.75 * s, 0.25 * T, 0.1 * T),
        Bump(pt(1.5 * s, s), s, 0.6 * T, 0.15 * T),
        Bump(pt(-0.5 * s, -s), 0.5 * s, 0.15 * T, 0.06 * T),
    ]


@dataclass
class WeakPairing:
    pairing: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.pairing >= -self.tolerance


def weak_subcaloric_pairing(v: np.ndarray, spec: GridSpec, bump: Bump, c_weak: float = WEAK_CONSTANT) -> WeakPairing:
    """sum v (Delta_h psi + d_t psi) h^n tau against a non-negative bump."""
    psi, dpsi_t = bump.sample(spec)
    lap = laplacian_array(psi, spec.h, spec.dim)
    val = float(np.sum(v * (lap + dpsi_t))) * spec.h**spec.dim * spec.tau
    tol = c_weak * (spec.h + spec.tau) * bump.c2_norm(spec)
    return WeakPairing(val, tol)


def subcaloric_battery(u: SpaceTimeField, e, bumps=None) -> list:
    """Pairings of (D_e u)_+ and (D_e u)_- against each bump: list of (sign, bump, WeakPairing)."""
    spec = u.spec
    bumps = default_bump_battery(spec) if bumps is None else bumps
    de = directional_derivative(u.values, spec.h, spec.dim, e)
    out = []
    for b in bumps:
        out.append(("+", b, weak_subcaloric_pairing(np.maximum(de, 0.0), spec, b)))
        out.append(("-", b, weak_subcaloric_pairing(np.maximum(-de, 0.0), spec, b)))
    return out


# ----------------------------------------------------------------------------
# per-probe report and sweep


@dataclass
class RegularityReport:
    probe: ProbePoint
    directions: list
    nu: tuple | None
    ut_sup_b7: float
    grad_gap: float
    grad_gap_energy: float
    slice0_gap: float
    weighted_hessian_energy: float
    phi_e_R: float | None
    split_norms: tuple | None
    split_clipped: bool
    dphi_sup: float | None
    hessian_sup: float
    constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["probe"] = self.probe.to_dict()
        return d


def regularity_probe(u: SpaceTimeField, z0: ProbePoint, pf: PenaltyFamily, theta_g: float | None = None,
                     scale: float = 1.0) -> RegularityReport:
    spec = u.spec
    check_probe(spec, z0)
    dirs = choose_directions(u, z0, theta_g)
    ut_sup = float(np.max(np.abs(time_derivative_array(u.values, spec.tau)[1:, u.grid.shell_mask(spec.shell_radius(3)) & u.grid.active])))
    gg = gradient_gap(u, z0)
    whe = weighted_hessian_energy(u, z0)
    phi_R = norms = dphi = None
    clipped = False
    if dirs.directions:
        e = np.asarray(dirs.directions[0])
        vals, _, _ = _phi_profile(u, z0, e, [z0.R])
        phi_R = vals[0]
        p, m, clipped = split_norms(u, z0, e)
        norms = (p, m)
        dphi = directional_datum_sup(u.values[0], spec, z0, e)
    k0 = u.grid.level_of(z0.t0)
    near = near_gamma(classify(u, scale=scale), 1)
    b = u.grid.shell_mask(z0.R, z0.x0) & u.grid.active
    hn = hessian_norm_array(u.values[1 : k0 + 1], spec.h, spec.dim)
    sel = b[None] & ~near[1 : k0 + 1]
    hsup = float(np.max(hn[sel])) if sel.any() else 0.0
    n = spec.dim
    R = z0.R
    consts = {
        "N1": ut_sup,
        "N2": gg.sup_gap / R,
        "N3": whe / R**2,
        "N4": phi_R,
        "N5": None if norms is None else max(norms) / R ** (n + 4),
        "c": hsup + ut_sup,
    }
    return RegularityReport(z0, dirs.directions, dirs.nu, ut_sup, gg.sup_gap, gg.energy_gap, gg.slice0_gap,
                            whe, phi_R, norms, clipped, dphi, hsup, consts)


@dataclass
class SweepFits:
    reports: list
    grad_gap_slope: float
    split_exponent_pos: float | None
    split_exponent_neg: float | None
    dphi_slope: float | None
    whe_ratio: float
    phi_R_ratio: float | None

    def rows(self) -> list:
        """CSV rows (R, quantity, value, fitted_exponent)."""
        out = []
        fits = {
            "grad_gap": self.grad_gap_slope,
            "split_pos": self.split_exponent_pos,
            "split_neg": self.split_exponent_neg,
            "dphi_sup": self.dphi_slope,
            "weighted_hessian_energy_over_R2": None,
            "phi_e_R": None,
        }
        for r in self.reports:
            vals = {
                "grad_gap": r.grad_gap,
                "split_pos": None if r.split_norms is None else r.split_norms[0],
                "split_neg": None if r.split_norms is None else r.split_norms[1],
                "dphi_sup": r.dphi_sup,
                "weighted_hessian_energy_over_R2": r.weighted_hessian_energy / r.probe.R**2,
                "phi_e_R": r.phi_e_R,
            }
            for q, v in vals.items():
                if v is not None:
                    out.append({"R": r.probe.R, "quantity": q, "value": v, "fitted_exponent": fits[q]})
        return out


def _ratio(vals):
    vals = [v for v in vals if v is not None]
    if not vals or min(vals) <= 0:
        return math.inf if vals else None
    return max(vals) / min(vals)


def regularity_sweep(u: SpaceTimeField, probes, pf: PenaltyFamily, scale: float = 1.0) -> SweepFits:
    """Probe reports merged in sorted probe order plus the scaling fits."""
    reports = [regularity_probe(u, z, pf, scale=scale) for z in sorted(probes, key=lambda z: z.key)]
    Rs = [r.probe.R for r in reports]

    def fit(getter):
        ys = [getter(r) for r in reports]
        if any(y is None or y <= 0 for y in ys):
            return None
        return fit_exponent(Rs, ys)

    return SweepFits(
        reports,
        fit(lambda r: r.grad_gap),
        fit(lambda r: None if r.split_norms is None else r.split_norms[0]),
        fit(lambda r: None if r.split_norms is None else r.split_norms[1]),
        fit(lambda r: r.dphi_sup),
        _ratio([r.weighted_hessian_energy / r.probe.R**2 for r in reports]),
        _ratio([r.phi_e_R for r in reports]),
    )
