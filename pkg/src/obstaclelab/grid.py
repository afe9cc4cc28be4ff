"""Tensor-product space-time grids, sampled fields and finite differences.

The spatial domain B_rho is realized as the box [-rho, rho]^n with a ball
mask.  Arrays holding a space-time field are indexed ``values[k, i0, ...]``
with ``k`` the time level; purely spatial arrays drop the leading axis.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError

SHELL_NAMES = ("B10", "B9", "B8", "B7", "B1")
PROVENANCES = ("solved", "analytic", "derived")

_INT_TOL = 1e-9


def _as_int_ratio(num: float, den: float, what: str) -> int:
    q = num / den
    n = int(round(q))
    if n < 1 or abs(q - n) > _INT_TOL * max(1.0, abs(q)):
        raise ConfigurationError(f"{what} = {q!r} is not a positive integer")
    return n


@dataclass(frozen=True)
class GridSpec:
    dim: int
    radius: float
    h: float
    tau: float
    horizon: float
    shell_fractions: tuple = (1.0, 0.9, 0.8, 0.7, 0.1)

    def __post_init__(self):
        object.__setattr__(self, "shell_fractions", tuple(float(s) for s in self.shell_fractions))
        problems = []
        if self.dim not in (1, 2):
            problems.append(f"dim must be 1 or 2, got {self.dim!r}")
        for name in ("radius", "h", "tau", "horizon"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive, got {getattr(self, name)!r}")
        fr = self.shell_fractions
        if not fr or any(not 0.0 < s <= 1.0 for s in fr) or any(a <= b for a, b in zip(fr, fr[1:])):
            problems.append(f"shell_fractions must be strictly decreasing in (0, 1], got {fr!r}")
        if not problems:
            for num, den, what in ((self.radius, self.h, "radius/h"), (self.horizon, self.tau, "horizon/tau")):
                try:
                    _as_int_ratio(num, den, what)
                except ConfigurationError as exc:
                    problems.append(str(exc))
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    @property
    def n_half(self) -> int:
        return _as_int_ratio(self.radius, self.h, "radius/h")

    @property
    def n_steps(self) -> int:
        return _as_int_ratio(self.horizon, self.tau, "horizon/tau")

    @property
    def spatial_shape(self) -> tuple:
        return (2 * self.n_half + 1,) * self.dim

    @property
    def shape(self) -> tuple:
        return (self.n_steps + 1,) + self.spatial_shape

    def shell_radius(self, which) -> float:
        """Radius of a nested shell, by index or by name (``"B7"`` etc.)."""
        if isinstance(which, str):
            names = SHELL_NAMES if len(self.shell_fractions) == len(SHELL_NAMES) else ()
            if which not in names:
                raise ConfigurationError(f"unknown shell {which!r}")
            which = names.index(which)
        return self.shell_fractions[which] * self.radius

    def refined(self, factor: int, time_factor: int | None = None) -> "GridSpec":
        """Spec with h/factor and tau/time_factor (default factor**2)."""
        tf = factor * factor if time_factor is None else time_factor
        return GridSpec(self.dim, self.radius, self.h / factor, self.tau / tf, self.horizon, self.shell_fractions)

    def with_(self, **changes) -> "GridSpec":
        d = asdict(self)
        d.update(changes)
        return GridSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shell_fractions"] = list(self.shell_fractions)
        return d


@dataclass(frozen=True)
class GridIndex:
    k: int
    i: tuple

    def __post_init__(self):
        object.__setattr__(self, "i", tuple(int(j) for j in np.atleast_1d(self.i)))


class Grid:
    """Node coordinates, masks and quadrature weights for a GridSpec."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        n = spec.n_half
        self.axis = -spec.radius + spec.h * np.arange(2 * n + 1)
        self.axis[n] = 0.0
        self.times = spec.tau * np.arange(spec.n_steps + 1)
        self.coords = np.stack(np.meshgrid(*([self.axis] * spec.dim), indexing="ij"))
        self.dist = np.sqrt(np.sum(self.coords**2, axis=0))
        self.ball_mask = self.dist <= spec.radius * (1 + 1e-12)
        # active nodes: ball nodes whose whole 5-point (3-point) stencil is in the ball
        act = self.ball_mask.copy()
        for ax in range(spec.dim):
            act &= np.roll(self.ball_mask, 1, axis=ax) & np.roll(self.ball_mask, -1, axis=ax)
            sl = [slice(None)] * spec.dim
            sl[ax] = 0
            act[tuple(sl)] = False
            sl[ax] = -1
            act[tuple(sl)] = False
        self.active = act
        w1 = np.full(2 * n + 1, spec.h)
        w1[0] = w1[-1] = spec.h / 2
        w = w1
        for _ in range(spec.dim - 1):
            w = np.multiply.outer(w, w1)
        self.weights = w * self.ball_mask

    @property
    def shape(self):
        return self.spec.spatial_shape

    def shell_mask(self, radius: float, center=None) -> np.ndarray:
        d = self.dist if center is None else self.distance_from(center)
        return d <= radius * (1 + 1e-12) + 1e-14

    def distance_from(self, center) -> np.ndarray:
        c = np.asarray(center, dtype=float).reshape((self.spec.dim,) + (1,) * self.spec.dim)
        return np.sqrt(np.sum((self.coords - c) ** 2, axis=0))

    def level_of(self, t: float) -> int:
        k = t / self.spec.tau
        kk = int(round(k))
        if abs(k - kk) > 1e-7 or not 0 <= kk <= self.spec.n_steps:
            raise DomainError(f"t = {t!r} is not a time level of the grid")
        return kk

    def node_of(self, x) -> tuple:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.rint((x + self.spec.radius) / self.spec.h).astype(int)
        if np.any(np.abs(self.axis[idx] - x) > 1e-9 * max(1.0, self.spec.radius)):
            raise DomainError(f"x = {x.tolist()} is not a grid node")
        return tuple(int(j) for j in idx)


@functools.lru_cache(maxsize=32)
def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    spec: GridSpec
    values: np.ndarray
    name: str = "u"
    provenance: str = "derived"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.spec.shape:
            raise ConfigurationError(f"field shape {v.shape} does not match grid shape {self.spec.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError(f"field {self.name!r} has non-finite values")
        if self.provenance not in PROVENANCES:
            raise ConfigurationError(f"unknown provenance {self.provenance!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> Grid:
        return build_grid(self.spec)

    def level(self, k: int) -> np.ndarray:
        return self.values[k]

    def derived(self, values, name: str) -> "SpaceTimeField":
        return SpaceTimeField(self.spec, values, name, "derived")

    @classmethod
    def from_function(cls, spec: GridSpec, fn, name="u", provenance="analytic"):
        """Sample ``fn(X, t)`` on every level; X has shape (n, *spatial)."""
        g = build_grid(spec)
        vals = np.stack([np.broadcast_to(fn(g.coords, t), g.shape) for t in g.times])
        return cls(spec, vals, name, provenance)


# ----------------------------------------------------------------------------
# array-level stencils (spatial axes are the trailing ``dim`` axes)


def _shift(a, ax, s):
    return np.roll(a, -s, axis=ax)


def _fix_edges(out, dim):
    # outer box layer: copy nearest interior value, stencils are not defined there
    for j in range(1, dim + 1):
        ax = out.ndim - j
        sl_src = [slice(None)] * out.ndim
        sl_dst = [slice(None)] * out.ndim
        sl_src[ax], sl_dst[ax] = 1, 0
        out[tuple(sl_dst)] = out[tuple(sl_src)]
        sl_src[ax], sl_dst[ax] = -2, -1
        out[tuple(sl_dst)] = out[tuple(sl_src)]
    return out


def grad_array(a: np.ndarray, h: float, dim: int) -> np.ndarray:
    """Central-difference gradient; shape (dim, *a.shape).

    The outermost box layer uses second-order one-sided differences.
    """
    off = a.ndim - dim
    out = np.gradient(a, h, axis=tuple(range(off, a.ndim)), edge_order=2)
    if dim == 1:
        out = [out]
    return np.stack(out)


def directional_derivative(a: np.ndarray, h: float, dim: int, e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    g = grad_array(a, h, dim)
    return np.tensordot(e, g, axes=(0, 0))


def second_diff_array(a: np.ndarray, h: float, dim: int, axis: int) -> np.ndarray:
    ax = a.ndim - dim + axis
    out = (_shift(a, ax, 1) - 2.0 * a + _shift(a, ax, -1)) / (h * h)
    return _fix_edges(out, dim)


def mixed_diff_array(a: np.ndarray, h: float, dim: int, i: int, j: int) -> np.ndarray:
    ai, aj = a.ndim - dim + i, a.ndim - dim + j
    pp = _shift(_shift(a, ai, 1), aj, 1)
    pm = _shift(_shift(a, ai, 1), aj, -1)
    mp = _shift(_shift(a, ai, -1), aj, 1)
    mm = _shift(_shift(a, ai, -1), aj, -1)
    out = (pp - pm - mp + mm) / (4.0 * h * h)
    return _fix_edges(out, dim)


def hessian_array(a: np.ndarray, h: float, dim: int) -> np.ndarray:
    """Hessian stencils; shape (dim, dim, *a.shape), symmetric by construction."""
    out = np.empty((dim, dim) + a.shape)
    for i in range(dim):
        out[i, i] = second_diff_array(a, h, dim, i)
        for j in range(i + 1, dim):
            out[i, j] = out[j, i] = mixed_diff_array(a, h, dim, i, j)
    return out


def hessian_norm_array(a: np.ndarray, h: float, dim: int) -> np.ndarray:
    hs = hessian_array(a, h, dim)
    return np.sqrt(np.sum(hs**2, axis=(0, 1)))


def laplacian_array(a: np.ndarray, h: float, dim: int) -> np.ndarray:
    return sum(second_diff_array(a, h, dim, i) for i in range(dim))


def time_derivative_array(values: np.ndarray, tau: float) -> np.ndarray:
    """Backward differences for k >= 1, second-order forward stencil at k = 0."""
    out = np.empty_like(values)
    out[1:] = (values[1:] - values[:-1]) / tau
    if values.shape[0] >= 3:
        out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * tau)
    else:
        out[0] = out[1]
    return out


# ----------------------------------------------------------------------------
# pointwise operators on fields


def _check_interior(field: SpaceTimeField, at: GridIndex):
    shape = field.spec.spatial_shape
    if len(at.i) != field.spec.dim:
        raise DomainError(f"index {at.i} has wrong dimension")
    if not 0 <= at.k <= field.spec.n_steps:
        raise DomainError(f"time level {at.k} out of range")
    for j, n in zip(at.i, shape):
        if not 1 <= j <= n - 2:
            raise DomainError(f"node {at.i} is not an interior node")


def _u(field, k, i, shifts):
    idx = list(i)
    for ax, s in shifts:
        idx[ax] += s
    return field.values[(k,) + tuple(idx)]


def gradient(field: SpaceTimeField, at: GridIndex) -> np.ndarray:
    _check_interior(field, at)
    h = field.spec.h
    return np.array(
        [(_u(field, at.k, at.i, [(j, 1)]) - _u(field, at.k, at.i, [(j, -1)])) / (2 * h) for j in range(field.spec.dim)]
    )


def hessian(field: SpaceTimeField, at: GridIndex) -> np.ndarray:
    _check_interior(field, at)
    h, n = field.spec.h, field.spec.dim
    c = _u(field, at.k, at.i, [])
    out = np.empty((n, n))
    for a in range(n):
        out[a, a] = (_u(field, at.k, at.i, [(a, 1)]) - 2 * c + _u(field, at.k, at.i, [(a, -1)])) / (h * h)
        for b in range(a + 1, n):
            val = (
                _u(field, at.k, at.i, [(a, 1), (b, 1)])
                - _u(field, at.k, at.i, [(a, 1), (b, -1)])
                - _u(field, at.k, at.i, [(a, -1), (b, 1)])
                + _u(field, at.k, at.i, [(a, -1), (b, -1)])
            ) / (4 * h * h)
            out[a, b] = out[b, a] = val
    return out


def time_derivative(field: SpaceTimeField, at: GridIndex) -> float:
    if not 0 <= at.k <= field.spec.n_steps:
        raise DomainError(f"time level {at.k} out of range")
    tau, i = field.spec.tau, at.i
    v = field.values
    if at.k >= 1:
        return float((v[(at.k,) + i] - v[(at.k - 1,) + i]) / tau)
    if field.spec.n_steps < 2:
        raise DomainError("one-sided t=0 stencil needs two further levels")
    return float((-3 * v[(0,) + i] + 4 * v[(1,) + i] - v[(2,) + i]) / (2 * tau))


def heat_residual(field: SpaceTimeField, at: GridIndex) -> float:
    """H_h[u] = Delta_h u - d_t u at an interior node, k >= 1."""
    if at.k < 1:
        raise DomainError("heat residual needs k >= 1")
    return float(np.trace(hessian(field, at)) - time_derivative(field, at))


# ----------------------------------------------------------------------------
# resampling


def coarsen(field: SpaceTimeField, space: int = 2, time: int = 2) -> SpaceTimeField:
    """Subsample every ``space``-th node and ``time``-th level."""
    s = field.spec
    if s.n_half % space or s.n_steps % time:
        raise ConfigurationError("grid does not nest under the requested coarsening")
    spec = GridSpec(s.dim, s.radius, s.h * space, s.tau * time, s.horizon, s.shell_fractions)
    sl = (slice(None, None, time),) + (slice(None, None, space),) * s.dim
    return SpaceTimeField(spec, field.values[sl], field.name, field.provenance)


# ----------------------------------------------------------------------------
# serialization
#
# CSV layout: header ``k,i0[,i1],value``; one row per node, rows ordered by
# k then the spatial multi-index in C order.  Values use ``repr`` so the file
# round-trips exactly.  The binary layout is an ``.npz`` with ``values`` and
# the grid spec fields.


def write_field_csv(field: SpaceTimeField, path) -> Path:
    path = Path(path)
    n = field.spec.dim
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"i{j}" for j in range(n)] + ["value"])
        for idx in np.ndindex(*field.values.shape):
            w.writerow(list(idx) + [repr(float(field.values[idx]))])
    return path


def read_field_csv(path, spec: GridSpec, name="u", provenance="derived") -> SpaceTimeField:
    vals = np.full(spec.shape, np.nan)
    with Path(path).open() as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[-1] != "value" or len(header) != spec.dim + 2:
            raise ConfigurationError(f"unexpected CSV header {header}")
        for row in r:
            vals[tuple(int(c) for c in row[:-1])] = float(row[-1])
    return SpaceTimeField(spec, vals, name, provenance)


def save_field(field: SpaceTimeField, path) -> Path:
    path = Path(path)
    d = field.spec.to_dict()
    with path.open("wb") as fh:
        np.savez(
            fh,
            values=field.values,
            dim=d["dim"],
            radius=d["radius"],
            h=d["h"],
            tau=d["tau"],
            horizon=d["horizon"],
            shell_fractions=np.array(d["shell_fractions"]),
            name=field.name,
            provenance=field.provenance,
        )
    return path


def load_field(path) -> SpaceTimeField:
    with np.load(path) as z:
        spec = GridSpec(
            int(z["dim"]), float(z["radius"]), float(z["h"]), float(z["tau"]), float(z["horizon"]),
            tuple(z["shell_fractions"].tolist()),
        )
        return SpaceTimeField(spec, z["values"], str(z["name"]), str(z["provenance"]))


def max_abs(a, mask=None) -> float:
    a = np.abs(a if mask is None else a[..., mask])
    return float(a.max()) if a.size else 0.0


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fit_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])
