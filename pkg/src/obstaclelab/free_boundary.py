"""Node classification into the phases and the zero set, and the free boundary split."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .grid import SpaceTimeField, grad_array, hessian_norm_array

POS, NEG, ZERO_FLAT, ZERO_GRAD, OUTSIDE = 1, -1, 0, 2, 9
LABEL_NAMES = {POS: "POS", NEG: "NEG", ZERO_FLAT: "ZERO_FLAT", ZERO_GRAD: "ZERO_GRAD"}

# Default thresholds: theta_u = THETA_U * h^2, theta_g = THETA_G * h.
THETA_U = 0.25
THETA_G = 2.0


@dataclass(eq=False)
class Classification:
    labels: np.ndarray  # int8, same shape as the field values; OUTSIDE off the ball
    theta_u: float
    theta_g: float
    field: SpaceTimeField

    def count(self, label) -> int:
        return int(np.sum(self.labels == label))

    @property
    def zero(self) -> np.ndarray:
        return (self.labels == ZERO_FLAT) | (self.labels == ZERO_GRAD)


@dataclass(eq=False)
class FreeBoundaryDecomposition:
    gamma: np.ndarray
    gamma0: np.ndarray
    gamma_star: np.ndarray

    def counts(self) -> list:
        """Per-level (|Gamma|, |Gamma0|, |Gamma*|)."""
        ax = tuple(range(1, self.gamma.ndim))
        return list(zip(self.gamma.sum(axis=ax).tolist(), self.gamma0.sum(axis=ax).tolist(),
                        self.gamma_star.sum(axis=ax).tolist()))


def default_thresholds(h: float, scale: float = 1.0) -> tuple:
    return THETA_U * scale * h * h, THETA_G * scale * h


def classify(u: SpaceTimeField, theta_u: float | None = None, theta_g: float | None = None,
             scale: float = 1.0) -> Classification:
    """Label ball-masked nodes: POS (u > theta_u), NEG (u < -theta_u),
    ZERO_FLAT (|u| <= theta_u, |Du| <= theta_g) and ZERO_GRAD otherwise.

    ``scale`` multiplies the default grid-tied thresholds; pass roughly
    max(lambda+, lambda-)/2 so the zero band tracks the curvature of u.
    """
    spec = u.spec
    du, dg = default_thresholds(spec.h, scale)
    theta_u = du if theta_u is None else theta_u
    theta_g = dg if theta_g is None else theta_g
    if not (theta_u > 0 and theta_g > 0):
        raise ValueError("thresholds must be positive")
    v = u.values
    gr = grad_array(v, spec.h, spec.dim)
    gnorm = np.sqrt(np.sum(gr * gr, axis=0))
    lab = np.full(v.shape, ZERO_GRAD, dtype=np.int8)
    small = np.abs(v) <= theta_u
    lab[small & (gnorm <= theta_g)] = ZERO_FLAT
    lab[v > theta_u] = POS
    lab[v < -theta_u] = NEG
    lab[:, ~u.grid.ball_mask] = OUTSIDE
    return Classification(lab, theta_u, theta_g, u)


def _spatial_neighbors(mask: np.ndarray) -> np.ndarray:
    """Nodes with a stencil neighbor (same level) in ``mask``."""
    out = np.zeros_like(mask)
    for ax in range(1, mask.ndim):
        for s in (1, -1):
            sh = np.roll(mask, s, axis=ax)
            sl = [slice(None)] * mask.ndim
            sl[ax] = 0 if s == 1 else -1
            sh[tuple(sl)] = False
            out |= sh
    return out


def decompose(c: Classification) -> FreeBoundaryDecomposition:
    nonzero = (c.labels == POS) | (c.labels == NEG)
    gamma = c.zero & _spatial_neighbors(nonzero)
    g0 = gamma & (c.labels == ZERO_FLAT)
    return FreeBoundaryDecomposition(gamma, g0, gamma & ~g0)


def near_gamma(c: Classification, cells: int = 1) -> np.ndarray:
    """Nodes within ``cells`` stencil steps (same level) of Gamma, Gamma included."""
    g = decompose(c).gamma
    if cells <= 0 or not g.any():
        return g
    return ndimage.binary_dilation(g, structure=_cross(g.ndim), iterations=cells)


@dataclass
class LambdaHessianCheck:
    value: float
    vacuous: bool
    nodes: int


def lambda_hessian_check(u: SpaceTimeField, c: Classification, distance_cells: int = 2) -> LambdaHessianCheck:
    """max |D^2 u| over interior ZERO_FLAT nodes at distance >= 2h from Gamma."""
    spec = u.spec
    near = near_gamma(c, distance_cells - 1)
    sel = (c.labels == ZERO_FLAT) & ~near
    sel[:, ~u.grid.active] = False
    n = int(sel.sum())
    if n == 0:
        return LambdaHessianCheck(0.0, True, 0)
    hn = hessian_norm_array(u.values, spec.h, spec.dim)
    return LambdaHessianCheck(float(np.max(hn[sel])), False, n)


def _cross(ndim):
    st = np.zeros((1,) + (3,) * (ndim - 1), dtype=bool)
    ctr = [0] + [1] * (ndim - 1)
    st[tuple(ctr)] = True
    for ax in range(1, ndim):
        for j in (0, 2):
            idx = list(ctr)
            idx[ax] = j
            st[tuple(idx)] = True
    return st


def write_decomposition_csv(c: Classification, path) -> Path:
    """Rows (t, x..., label) for every ball-masked node on Gamma or in the zero set."""
    path = Path(path)
    dec = decompose(c)
    g = c.field.grid
    n = c.field.spec.dim
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{j}" for j in range(n)] + ["label", "gamma"])
        for idx in zip(*np.nonzero(c.zero)):
            k, sp_idx = idx[0], idx[1:]
            x = [repr(float(g.axis[j])) for j in sp_idx]
            tag = "gamma0" if dec.gamma0[idx] else ("gamma_star" if dec.gamma_star[idx] else "")
            w.writerow([repr(float(g.times[k]))] + x + [LABEL_NAMES[int(c.labels[idx])], tag])
    return path
