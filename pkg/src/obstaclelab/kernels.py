"""Heat kernel, radial cut-offs, heat-weighted energies and the
two-phase monotonicity functional.

The weighted energy of a field v at a probe z0 = (x0, t0) over a window of
length r^2 is

    I(r, v, z0) = int_{t0 - r^2}^{t0} int |Dv(x, t)|^2 G(x - x0, t0 - t) dx dt

and the monotonicity functional is Phi(r) = I(r, zeta h1) I(r, zeta h2) / r^4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, GeometryError, PreconditionError
from .grid import GridSpec, SpaceTimeField, build_grid, coarsen, directional_derivative, grad_array
from .penalty import smoothstep5, smoothstep5_d1, smoothstep5_d2

# Remainder constant of the localized monotonicity inequality, calibrated on
# caloric quadratics and cubics (oracle.calibrate_monotonicity_constant) and
# frozen.  No calibration field showed any increase of Phi toward small r, so
# the fitted value is 0 and the remainder term drops out of the check.
MONOTONICITY_CONSTANT = {1: 0.0, 2: 0.0}


# ----------------------------------------------------------------------------
# heat kernel


def heat_kernel(x, t, dim: int | None = None):
    """Fundamental solution; ``x`` has the spatial axis first, shape (n, ...)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0] if dim is None else dim
    t = np.asarray(t, dtype=float)
    r2 = np.sum(x * x, axis=0)
    tt = np.where(t > 0, t, 1.0)
    g = np.exp(-r2 / (4.0 * tt)) / (4.0 * math.pi * tt) ** (n / 2.0)
    out = np.where(t > 0, g, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HeatKernel:
    dim: int

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        return heat_kernel(x, t, self.dim)


def kernel_eval(k: HeatKernel, x, t):
    return k(x, t)


def kernel_slice_mass(spec: GridSpec, t: float, center=None) -> float:
    """Quadrature of G(. - x0, t) over the ball-masked nodes."""
    g = build_grid(spec)
    c = np.zeros(spec.dim) if center is None else np.asarray(center, dtype=float)
    X = g.coords - c.reshape((spec.dim,) + (1,) * spec.dim)
    return float(np.sum(g.weights * heat_kernel(X, t, spec.dim)))


def kernel_caloric_defect(dim: int, h: float, t: float, radius: float = 4.0) -> float:
    """max |Delta_h G(., t) - d_t G(., t)| over interior nodes, d_t G taken in closed form."""
    n = int(round(radius / h))
    ax = h * np.arange(-n, n + 1)
    X = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"))
    G = heat_kernel(X, t, dim)
    r2 = np.sum(X * X, axis=0)
    dG = G * (r2 / (4 * t * t) - dim / (2 * t))
    inner = (slice(1, -1),) * dim
    lap = np.zeros_like(G[inner])
    for a in range(dim):
        lo = [slice(1, -1)] * dim
        hi = [slice(1, -1)] * dim
        lo[a] = slice(0, -2)
        hi[a] = slice(2, None)
        lap += (G[tuple(lo)] - 2 * G[inner] + G[tuple(hi)]) / (h * h)
    return float(np.max(np.abs(lap - dG[inner])))


# ----------------------------------------------------------------------------
# cut-off


def cutoff_profile(s):
    """xi(s): 1 on [0, 1], 0 on [2, inf), quintic C^2 ramp between.

    Returns (xi, xi', xi'') as arrays.
    """
    s = np.asarray(s, dtype=float)
    y = s - 1.0
    return 1.0 - smoothstep5(y), -smoothstep5_d1(y), -smoothstep5_d2(y)


@dataclass(frozen=True)
class CutoffProfile:
    """xi(|x - center| / radius); identically 1 on B_radius, 0 off B_{2 radius}."""

    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError(f"cut-off radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    def evaluate(self, X):
        """(value, gradient, laplacian) at points X of shape (n, ...)."""
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        c = np.asarray(self.center).reshape((n,) + (1,) * (X.ndim - 1))
        d = X - c
        rho = np.sqrt(np.sum(d * d, axis=0))
        xi, d1, d2 = cutoff_profile(rho / self.radius)
        safe = np.where(rho > 0, rho, 1.0)
        # d1 vanishes on the plateau, so rho = 0 contributes nothing
        grad = np.where(rho > 0, d1 / (self.radius * safe), 0.0) * d
        lap = d2 / self.radius**2 + np.where(rho > 0, (n - 1) * d1 / (self.radius * safe), 0.0)
        return xi, grad, lap

    def values_on(self, spec: GridSpec) -> np.ndarray:
        return self.evaluate(build_grid(spec).coords)[0]

    def realized_constants(self, samples: int = 4001) -> tuple:
        """(sup r|D xi|, sup r^2 |Delta xi|) over the annulus, by dense sampling along rays."""
        n = len(self.center)
        s = np.linspace(1.0, 2.0, samples)
        pts = np.zeros((n, samples))
        pts[0] = s * self.radius
        pts = pts + np.asarray(self.center).reshape(n, 1)
        _, grad, lap = self.evaluate(pts)
        gnorm = np.sqrt(np.sum(grad * grad, axis=0))
        return float(np.max(self.radius * gnorm)), float(np.max(self.radius**2 * np.abs(lap)))


def cutoff_eval(c: CutoffProfile, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        v, g, lap = c.evaluate(x.reshape(-1, 1))
        return float(v[0]), g[:, 0], float(lap[0])
    return c.evaluate(x)


# ----------------------------------------------------------------------------
# probe points


@dataclass(frozen=True)
class ProbePoint:
    x0: tuple
    t0: float

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        if not self.t0 > 0:
            raise GeometryError(f"probe time must be positive, got {self.t0!r}")

    @property
    def R(self) -> float:
        return math.sqrt(self.t0)

    @property
    def key(self) -> tuple:
        return (self.t0,) + self.x0

    def to_dict(self) -> dict:
        return {"x0": list(self.x0), "t0": self.t0, "R": self.R}


def check_probe(spec: GridSpec, z0: ProbePoint, shell: str = "B7", factor: float = 6.0) -> None:
    """Raise GeometryError unless B_{factor R}(x0) sits in the given shell and
    t0 is a time level of the grid."""
    if len(z0.x0) != spec.dim:
        raise GeometryError(f"probe {z0.x0} has wrong dimension for a {spec.dim}D grid")
    rad = spec.shell_radius(shell) if len(spec.shell_fractions) == 5 else spec.shell_fractions[-2] * spec.radius
    reach = float(np.linalg.norm(z0.x0)) + factor * z0.R
    if reach > rad * (1 + 1e-12):
        raise GeometryError(
            f"probe x0={z0.x0}, t0={z0.t0}: B_{{{factor:g}R}}(x0) reaches |x| = {reach:.4g} "
            f"outside the {shell} shell (radius {rad:.4g}); the backward cylinder Q_6R(z0) must lie in C_7"
        )
    try:
        build_grid(spec).level_of(z0.t0)
    except DomainError as exc:
        raise GeometryError(str(exc)) from None


# ----------------------------------------------------------------------------
# quadrature


def heat_weighted_integral(density, spec: GridSpec, z0: ProbePoint, t_lo: float, t_hi: float, cap: bool = True):
    """int_{t_lo}^{t_hi'} sum_x density(k) G(x - x0, t0 - t) w_x dt.

    ``density`` is an array indexed by time level (or a callable k -> array).
    Time is integrated by the midpoint rule over level intervals, the density
    at a midpoint is the mean of the two adjacent levels, and with ``cap`` the
    upper limit is t_hi' = min(t_hi, t0 - tau).  Returns (value, capped_length).
    """
    g = build_grid(spec)
    tau = spec.tau
    t_top = min(t_hi, z0.t0 - tau) if cap else t_hi
    capped = max(0.0, t_hi - t_top)
    if t_top <= t_lo:
        return 0.0, capped
    X = g.coords - np.asarray(z0.x0).reshape((spec.dim,) + (1,) * spec.dim)
    get = density if callable(density) else (lambda k: density[k])
    k_lo = int(math.floor(t_lo / tau + 1e-9))
    k_hi = int(math.ceil(t_top / tau - 1e-9))
    total = 0.0
    cache = {}
    for k in range(k_lo, k_hi):
        a = max(t_lo, k * tau)
        b = min(t_top, (k + 1) * tau)
        if b <= a + 1e-15:
            continue
        for kk in (k, k + 1):
            if kk not in cache:
                cache[kk] = get(kk)
        dens = 0.5 * (cache[k] + cache[k + 1])
        G = heat_kernel(X, z0.t0 - 0.5 * (a + b), spec.dim)
        total += (b - a) * float(np.sum(g.weights * dens * G))
        cache.pop(k - 1, None)
    return total, capped


def gradient_energy_density(values: np.ndarray, spec: GridSpec) -> np.ndarray:
    """|Dv|^2 on every level of a (levels, ...) stack."""
    gr = grad_array(values, spec.h, spec.dim)
    return np.sum(gr * gr, axis=0)


def _window_levels(spec: GridSpec, t_lo: float, t0: float) -> tuple:
    k_lo = int(math.floor(max(t_lo, 0.0) / spec.tau + 1e-9))
    k_hi = int(round(t0 / spec.tau))
    return k_lo, k_hi


def weighted_energy(v: SpaceTimeField, z0: ProbePoint, r: float, cap: bool = True) -> float:
    """I(r, v, z0) by trapezoid-in-space / midpoint-in-time quadrature."""
    if not 0 < r <= z0.R * (1 + 1e-12):
        raise DomainError(f"radius {r!r} must lie in (0, R = {z0.R:.4g}]")
    spec = v.spec
    k_lo, k_hi = _window_levels(spec, z0.t0 - r * r, z0.t0)
    dens = gradient_energy_density(v.values[k_lo : k_hi + 1], spec)
    val, _ = heat_weighted_integral(lambda k: dens[k - k_lo], spec, z0, z0.t0 - r * r, z0.t0, cap)
    return val


def check_disjoint(h1: np.ndarray, h2: np.ndarray, theta: float, max_report: int = 10) -> None:
    if np.any(h1 < 0) or np.any(h2 < 0):
        raise PreconditionError("h1 and h2 must be non-negative")
    bad = np.argwhere((h1 > theta) & (h2 > theta))
    if len(bad):
        listed = ", ".join(str(tuple(int(j) for j in b)) for b in bad[:max_report])
        raise PreconditionError(f"h1 h2 != 0 at {len(bad)} nodes (theta={theta:g}), e.g. {listed}")


def phi_functional(h1: SpaceTimeField, h2: SpaceTimeField, z0: ProbePoint, r: float, c: CutoffProfile,
                   theta: float = 0.0, cap: bool = True) -> float:
    """(1/r^4) I(r, c h1, z0) I(r, c h2, z0)."""
    check_disjoint(h1.values, h2.values, theta)
    zeta = c.values_on(h1.spec)
    i1 = weighted_energy(h1.derived(h1.values * zeta, "zeta*h1"), z0, r, cap)
    i2 = weighted_energy(h2.derived(h2.values * zeta, "zeta*h2"), z0, r, cap)
    return i1 * i2 / r**4


def cylinder_l2_sq(values: np.ndarray, spec: GridSpec, z0: ProbePoint, radius: float) -> tuple:
    """Squared L2 norm over B_radius(x0) x (t0 - radius^2, t0] clipped to t >= 0.

    Trapezoid in time over levels, ball-masked trapezoid in space.
    Returns (value, clipped).
    """
    g = build_grid(spec)
    t_lo = z0.t0 - radius * radius
    clipped = t_lo < 0
    k_lo, k_hi = _window_levels(spec, t_lo, z0.t0)
    w = g.weights * g.shell_mask(radius, z0.x0)
    wt = np.full(k_hi - k_lo + 1, spec.tau)
    wt[0] = wt[-1] = spec.tau / 2
    sq = values[k_lo : k_hi + 1] ** 2
    return float(np.sum(np.tensordot(wt, sq, axes=1) * w)), clipped


# ----------------------------------------------------------------------------
# monotonicity scan


def dyadic_radii(R: float, h: float) -> list:
    radii, r = [], R
    while r >= 2 * h * (1 - 1e-12):
        radii.append(r)
        r /= 2
    return radii


@dataclass
class MonotonicityReport:
    direction: tuple
    probe: ProbePoint
    radii: list
    phi: list
    phi_R: float
    remainder: float
    n_const: float
    norms: tuple
    tol_disc: float
    cap: float
    worst_violation: float = field(init=False)

    def __post_init__(self):
        self.worst_violation = max(p - self.phi_R - self.remainder for p in self.phi)

    @property
    def bound(self) -> float:
        return self.phi_R + self.remainder + self.tol_disc

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.tol_disc

    def rows(self) -> list:
        b = self.bound
        return [{"r": r, "phi_e": p, "bound": b, "margin": b - p} for r, p in zip(self.radii, self.phi)]

    def to_dict(self) -> dict:
        return {
            "direction": list(self.direction),
            "probe": self.probe.to_dict(),
            "radii": self.radii,
            "phi_e": self.phi,
            "phi_e_R": self.phi_R,
            "remainder": self.remainder,
            "n_const": self.n_const,
            "split_norms_sq": list(self.norms),
            "worst_violation": self.worst_violation,
            "tol_disc": self.tol_disc,
            "time_cap": self.cap,
            "passed": self.passed,
        }


def _split_parts(u: SpaceTimeField, e, k_hi: int):
    de = directional_derivative(u.values[: k_hi + 1], u.spec.h, u.spec.dim, e)
    return np.maximum(de, 0.0), np.maximum(-de, 0.0)


def _phi_profile(u: SpaceTimeField, z0: ProbePoint, e, radii, cap=True):
    spec = u.spec
    k0 = build_grid(spec).level_of(z0.t0)
    hp, hm = _split_parts(u, e, k0)
    zeta = CutoffProfile(z0.x0, z0.R).values_on(spec)
    d1 = gradient_energy_density(hp * zeta, spec)
    d2 = gradient_energy_density(hm * zeta, spec)
    out = []
    for r in radii:
        i1, _ = heat_weighted_integral(d1, spec, z0, z0.t0 - r * r, z0.t0, cap)
        i2, _ = heat_weighted_integral(d2, spec, z0, z0.t0 - r * r, z0.t0, cap)
        out.append(i1 * i2 / r**4)
    return out, hp, hm


def monotonicity_scan(u: SpaceTimeField, z0: ProbePoint, e, radii=None, n_const: float | None = None,
                      richardson: bool = True, shell: str = "B7") -> MonotonicityReport:
    """Phi_e(r) = Phi(r, (D_e u)_+, (D_e u)_-, zeta_R, z0) on dyadic radii, with
    the remainder N/R^{2n+8} ||h1||^2 ||h2||^2 over Q_{2R}(z0) and a Richardson
    estimate of the quadrature error from a 2x coarsened copy of u."""
    spec = u.spec
    check_probe(spec, z0, shell)
    e = np.asarray(e, dtype=float)
    if not abs(np.linalg.norm(e) - 1.0) < 1e-9:
        raise PreconditionError("direction must be a unit vector")
    R = z0.R
    radii = dyadic_radii(R, spec.h) if radii is None else sorted((float(r) for r in radii), reverse=True)
    if not radii:
        raise PreconditionError(f"no dyadic radius >= 2h fits below R = {R:.4g}")
    if any(r < 2 * spec.h * (1 - 1e-12) for r in radii):
        raise PreconditionError("radii below the resolvability floor 2h")
    if any(r > R * (1 + 1e-12) for r in radii):
        raise PreconditionError("radii must not exceed R")
    if abs(radii[0] - R) > 1e-12 * R:
        radii = [R] + radii
    n = spec.dim
    N = MONOTONICITY_CONSTANT[n] if n_const is None else n_const
    phis, hp, hm = _phi_profile(u, z0, e, radii)
    n1, _ = cylinder_l2_sq(hp, spec, z0, 2 * R)
    n2, _ = cylinder_l2_sq(hm, spec, z0, 2 * R)
    remainder = N / R ** (2 * n + 8) * n1 * n2
    tol = 0.0
    if richardson:
        k0 = build_grid(spec).level_of(z0.t0)
        tf = 2 if (k0 % 2 == 0 and spec.n_steps % 2 == 0) else 1
        coarse = coarsen(u, 2, tf)
        phis_c, _, _ = _phi_profile(coarse, z0, e, radii)
        tol = max(abs(a - b) for a, b in zip(phis, phis_c))
    return MonotonicityReport(
        tuple(float(c) for c in e), z0, radii, phis, phis[0], remainder, N, (n1, n2), tol, spec.tau,
    )
