"""Penalty family f^eps, the exact two-phase right-hand side, and mollified data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, MollificationError
from .grid import Grid, hessian_array


def smoothstep5(y):
    """C^2 quintic ramp 6y^5 - 15y^4 + 10y^3, clamped to [0, 1]."""
    y = np.clip(y, 0.0, 1.0)
    return y * y * y * (10.0 + y * (-15.0 + 6.0 * y))


def smoothstep5_d1(y):
    inside = (y > 0.0) & (y < 1.0)
    return np.where(inside, 30.0 * y * y * (1.0 - y) ** 2, 0.0)


def smoothstep5_d2(y):
    inside = (y > 0.0) & (y < 1.0)
    return np.where(inside, 60.0 * y * (1.0 - y) * (1.0 - 2.0 * y), 0.0)


@dataclass(frozen=True)
class PenaltyFamily:
    """Smooth non-decreasing penalty with ``f(s) = lambda_plus`` for s >= eps
    and ``f(s) = -lambda_minus`` for s <= -eps.

    ``allow_zero`` enables the lambda_plus = lambda_minus = 0 mode used to
    validate the solver on caloric fields.
    """

    lambda_plus: float
    lambda_minus: float
    eps: float
    allow_zero: bool = False

    def __post_init__(self):
        problems = []
        if self.lambda_plus < 0 or self.lambda_minus < 0:
            problems.append("lambda_plus and lambda_minus must be non-negative")
        if not self.allow_zero and not self.lambda_plus + self.lambda_minus > 0:
            problems.append("lambda_plus + lambda_minus must be positive")
        if not self.eps > 0:
            problems.append(f"eps must be positive, got {self.eps!r}")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    @classmethod
    def validation(cls, eps: float = 1e-3) -> "PenaltyFamily":
        return cls(0.0, 0.0, eps, allow_zero=True)

    @property
    def jump(self) -> float:
        return self.lambda_plus + self.lambda_minus

    def __call__(self, s):
        return penalty_eval(self, s)

    def derivative(self, s):
        y = (np.asarray(s, dtype=float) + self.eps) / (2.0 * self.eps)
        return self.jump * smoothstep5_d1(y) / (2.0 * self.eps)

    def lipschitz_constant(self) -> float:
        """max f' = (15/16) (lambda_plus + lambda_minus) / eps."""
        return 15.0 / 16.0 * self.jump / self.eps

    def with_eps(self, eps: float) -> "PenaltyFamily":
        return PenaltyFamily(self.lambda_plus, self.lambda_minus, eps, self.allow_zero)

    def to_dict(self) -> dict:
        return {"lambda_plus": self.lambda_plus, "lambda_minus": self.lambda_minus, "eps": self.eps}


def penalty_eval(pf: PenaltyFamily, s):
    s = np.asarray(s, dtype=float)
    y = (s + pf.eps) / (2.0 * pf.eps)
    out = -pf.lambda_minus + pf.jump * smoothstep5(y)
    return float(out) if out.ndim == 0 else out


def exact_rhs(pf: PenaltyFamily, s):
    s = np.asarray(s, dtype=float)
    out = np.where(s > 0, pf.lambda_plus, np.where(s < 0, -pf.lambda_minus, 0.0))
    return float(out) if out.ndim == 0 else out


def measured_lipschitz(pf: PenaltyFamily, samples: int = 20001) -> float:
    s = np.linspace(-1.5 * pf.eps, 1.5 * pf.eps, samples)
    f = penalty_eval(pf, s)
    return float(np.max(np.abs(np.diff(f)) / np.diff(s)))


# ----------------------------------------------------------------------------
# mollification


@dataclass(frozen=True, eq=False)
class MollifiedInitial:
    values: np.ndarray
    eps: float
    certified_gap: float
    radius: float
    source: object = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _bump_kernel(radius: float, h: float, dim: int) -> np.ndarray:
    m = int(np.floor(radius / h))
    offs = h * np.arange(-m, m + 1)
    grids = np.meshgrid(*([offs] * dim), indexing="ij")
    s2 = sum(g * g for g in grids) / (radius * radius)
    with np.errstate(divide="ignore", over="ignore"):
        k = np.where(s2 < 1.0, np.exp(-1.0 / np.maximum(1.0 - s2, 1e-300)), 0.0)
    return k / k.sum()


def _sample_padded(phi, grid: Grid, pad: int) -> tuple:
    spec = grid.spec
    n = spec.n_half
    if callable(phi):
        axis = spec.h * np.arange(-n - pad, n + pad + 1)
        X = np.stack(np.meshgrid(*([axis] * spec.dim), indexing="ij"))
        full = np.asarray(phi(X), dtype=float)
        inner = full[(slice(pad, -pad or None),) * spec.dim] if pad else full
        return full, inner
    arr = np.asarray(phi, dtype=float)
    if arr.shape != grid.shape:
        raise ConfigurationError(f"sampled initial datum has shape {arr.shape}, expected {grid.shape}")
    # odd reflection keeps affine data affine
    full = np.pad(arr, pad, mode="reflect", reflect_type="odd") if pad else arr
    return full, arr


def curvature_bound(phi, grid: Grid) -> float:
    """Sup of |D^2 phi| estimated from second differences on the grid."""
    _, vals = _sample_padded(phi, grid, 1)
    hs = hessian_array(vals, grid.spec.h, grid.spec.dim)
    return float(np.max(np.abs(hs[(slice(None), slice(None)) + (slice(1, -1),) * grid.spec.dim])))


def mollify_initial(phi, eps: float, grid: Grid, *, enabled: bool = True) -> MollifiedInitial:
    """Convolve phi with a normalized C^inf bump and certify sup|phi - phi_eps| <= eps.

    The radius is ``min(sqrt(eps / K), margin / 2)`` where K bounds |D^2 phi|
    and ``margin`` is the gap between the two outermost shells; it is never
    below 2h.  With ``enabled=False`` the datum is used as sampled.
    """
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps!r}")
    spec = grid.spec
    if not enabled:
        _, vals = _sample_padded(phi, grid, 0)
        return MollifiedInitial(vals, eps, 0.0, 0.0, phi)
    K = curvature_bound(phi, grid)
    fr = spec.shell_fractions
    margin = (fr[0] - fr[1]) * spec.radius if len(fr) > 1 else spec.radius
    r = margin / 2.0 if K == 0 else min(np.sqrt(eps / K), margin / 2.0)
    r = max(r, 2.0 * spec.h)
    while True:
        ker = _bump_kernel(r, spec.h, spec.dim)
        pad = ker.shape[0] // 2
        full, vals = _sample_padded(phi, grid, pad)
        sm = ndimage.correlate(full, ker, mode="nearest")
        sm = sm[(slice(pad, -pad or None),) * spec.dim] if pad else sm
        gap = float(np.max(np.abs(sm - vals)))
        if gap <= eps:
            return MollifiedInitial(sm, eps, gap, r, phi)
        if r <= 2.0 * spec.h * (1 + 1e-12):
            raise MollificationError(
                f"cannot certify sup|phi - phi_eps| <= {eps:g} at the minimum radius 2h (gap {gap:.3e})"
            )
        r = max(r / 2.0, 2.0 * spec.h)
