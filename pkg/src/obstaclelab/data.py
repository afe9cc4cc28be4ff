"""Analytic initial data in C^{1,1}.

Every datum is a callable taking coordinates ``X`` of shape ``(n, ...)`` and
knows how to describe itself as a flat dict so configs and cache keys can
round-trip it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError


def capped_quadratic(s, a: float, c: float):
    """a s^2 for |s| <= c, continued linearly (C^{1,1}, not C^2) beyond."""
    s = np.abs(s)
    return np.where(s <= c, a * s * s, a * (2.0 * c * s - c * c))


class Datum:
    kind = ""

    def __call__(self, X):
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class CappedWell(Datum):
    """Radial well a(|x|^2 - b^2) that turns linear for |x| > c."""

    a: float = 1.0
    b: float = 0.4
    c: float = 1.2
    kind = "capped_well"

    def __call__(self, X):
        r = np.sqrt(np.sum(np.asarray(X) ** 2, axis=0))
        return capped_quadratic(r, self.a, self.c) - self.a * self.b**2


@dataclass(frozen=True)
class CappedSaddle(Datum):
    """psi(x1) - psi(x2) + shift with psi a capped quadratic (2D two-phase cross)."""

    a: float = 1.0
    c: float = 0.6
    shift: float = 0.0
    kind = "capped_saddle"

    def __call__(self, X):
        X = np.asarray(X)
        out = capped_quadratic(X[0], self.a, self.c) + self.shift
        if X.shape[0] > 1:
            out = out - capped_quadratic(X[1], self.a, self.c)
        return out


@dataclass(frozen=True)
class TwoPhaseProfile(Datum):
    """(lp/2)(x1 - s)_+^2 - (lm/2)(x1 - s)_-^2."""

    lp: float = 2.0
    lm: float = 2.0
    s: float = 0.0
    kind = "two_phase"

    def __call__(self, X):
        y = np.asarray(X)[0] - self.s
        return 0.5 * self.lp * np.maximum(y, 0.0) ** 2 - 0.5 * self.lm * np.maximum(-y, 0.0) ** 2


@dataclass(frozen=True)
class DeadZone(Datum):
    """(a/2) sign(x1) (|x1| - w)_+^2: identically zero on the slab |x1| <= w."""

    a: float = 1.0
    w: float = 0.3
    kind = "dead_zone"

    def __call__(self, X):
        y = np.asarray(X)[0]
        return 0.5 * self.a * np.sign(y) * np.maximum(np.abs(y) - self.w, 0.0) ** 2


@dataclass(frozen=True)
class Affine(Datum):
    b1: float = 1.0
    b2: float = 0.0
    c0: float = 0.0
    kind = "affine"

    def __call__(self, X):
        X = np.asarray(X)
        out = self.b1 * X[0] + self.c0
        if X.shape[0] > 1:
            out = out + self.b2 * X[1]
        return out


@dataclass(frozen=True)
class Cosine(Datum):
    amp: float = 0.5
    k: float = 1.0
    kind = "cosine"

    def __call__(self, X):
        return self.amp * np.prod(np.cos(self.k * np.asarray(X)), axis=0)


@dataclass(frozen=True)
class SignedQuadratic(Datum):
    """(a/2) x1 |x1|, the C^{1,1} datum used for mollifier certification."""

    a: float = 1.0
    kind = "signed_quadratic"

    def __call__(self, X):
        y = np.asarray(X)[0]
        return 0.5 * self.a * y * np.abs(y)


DATA = {cls.kind: cls for cls in (CappedWell, CappedSaddle, TwoPhaseProfile, DeadZone, Affine, Cosine, SignedQuadratic)}


def make_datum(kind: str, **params) -> Datum:
    try:
        cls = DATA[kind]
    except KeyError:
        raise ConfigurationError(f"unknown initial datum kind {kind!r}") from None
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {kind!r}: {exc}") from None
