"""Closed-form solutions of the two-mode system.

The normalized coupling (``c12 = c21 = 1``) turns radial solutions into the
ODE pair ``-eta_i'' + eta_i - eta_j = 0``, whose general solution gives the
"generalized cones"::

    psi_1 = C1 exp(sqrt2 r) + C2 exp(-sqrt2 r) + a r + b
    psi_2 = -C1 exp(sqrt2 r) - C2 exp(-sqrt2 r) + a r + b,   r = |x - x0|

Everything here is pure and vectorized over points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import DomainSpec
from .errors import NonpositiveRadius, OutOfAnnulus, OutOfBall, StepTooLarge

SQRT2 = np.sqrt(2.0)


def _real(s) -> np.ndarray:
    s = np.asarray(s)
    return s if s.dtype == np.longdouble else s.astype(float)


def _sqrt2(s: np.ndarray):
    return np.sqrt(np.longdouble(2)) if s.dtype == np.longdouble else SQRT2


def _points(x, n: int | None = None) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        return pts.reshape(1, 1)
    if pts.ndim == 1:
        return pts.reshape(1, -1) if n is None or pts.size == n else pts.reshape(-1, 1)
    return pts


@dataclass(frozen=True)
class ClosedFormPair:
    """A mode-indexed function pair given by a vectorized callable.

    ``fn(points) -> (m, P)``.  ``domain`` is None for functions defined on all
    of R^n; analysis routines use it for containment checks.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    domain: DomainSpec | None = None
    m: int = 2

    def evaluate(self, pts) -> np.ndarray:
        return np.asarray(self.fn(_points(pts, self.dim)), dtype=float)


@dataclass(frozen=True)
class ConePair:
    x0: tuple[float, ...]
    C1: float
    C2: float
    a: float
    b: float

    @property
    def vertex(self) -> np.ndarray:
        return np.asarray(self.x0, dtype=float)

    @property
    def differentiable(self) -> tuple[bool, bool]:
        k1 = SQRT2 * (self.C1 - self.C2) + self.a
        k2 = SQRT2 * (self.C2 - self.C1) + self.a
        return k1 == 0, k2 == 0

    def profiles(self) -> tuple[Callable, Callable]:
        """Radial profiles ``(eta_1, eta_2)``."""

        # extended-precision input stays extended (radial_residual relies on it)
        def eta1(s):
            s = _real(s)
            k = _sqrt2(s)
            return self.C1 * np.exp(k * s) + self.C2 * np.exp(-k * s) + self.a * s + self.b

        def eta2(s):
            s = _real(s)
            k = _sqrt2(s)
            return -self.C1 * np.exp(k * s) - self.C2 * np.exp(-k * s) + self.a * s + self.b

        return eta1, eta2

    def as_pair(self) -> ClosedFormPair:
        return ClosedFormPair(lambda p: np.stack(cone_eval(self, p)), dim=len(self.x0))


def cone_eval(p: ConePair, x) -> tuple[np.ndarray | float, np.ndarray | float]:
    pts = _points(x, len(p.x0))
    r = np.linalg.norm(pts - p.vertex, axis=1)
    e1, e2 = p.profiles()
    psi1, psi2 = e1(r), e2(r)
    if np.ndim(x) <= 1:
        return float(psi1[0]), float(psi2[0])
    return psi1, psi2


def fit_cone(u10: float, u20: float, M1: float, M2: float, r: float, x0=(0.0,)) -> ConePair:
    """Cone coefficients matching values at the vertex and sphere maxima at radius ``r``."""
    if not r > 0:
        raise NonpositiveRadius(f"radius must be > 0, got {r}")
    ep, em = np.exp(SQRT2 * r), np.exp(-SQRT2 * r)
    den = 2.0 * (ep - em)
    d, dM = u10 - u20, M1 - M2
    C1 = (-d * em + dM) / den
    C2 = (d * ep - dM) / den
    a = (M1 + M2 - (u10 + u20)) / (2.0 * r)
    b = (u10 + u20) / 2.0
    return ConePair(tuple(float(t) for t in np.atleast_1d(x0)), float(C1), float(C2), float(a), float(b))


def _example1_values(pts: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(pts, axis=1)
    v1 = -(np.exp(SQRT2 * r) + np.exp(-SQRT2 * r)) / (np.exp(SQRT2) + np.exp(-SQRT2))
    return np.stack([v1, -v1])


def example1(x, n: int = 2):
    """Classical solution on the unit ball with ``g1 = -1``, ``g2 = 1``."""
    pts = _points(x, n)
    if np.any(np.linalg.norm(pts, axis=1) > 1.0 + 1e-12):
        raise OutOfBall("example1 is defined on the closed unit ball")
    v = _example1_values(pts)
    if np.ndim(x) <= 1:
        return float(v[0, 0]), float(v[1, 0])
    return v[0], v[1]


def example1_pair(n: int = 2) -> ClosedFormPair:
    return ClosedFormPair(_example1_values, dim=n, domain=DomainSpec.ball(np.zeros(n), 1.0))


def example1_cone(n: int = 2) -> ConePair:
    """Example-1 solution written as a cone pair with vertex at the origin."""
    C = -1.0 / (np.exp(SQRT2) + np.exp(-SQRT2))
    return ConePair(tuple([0.0] * n), C, C, 0.0, 0.0)


def radial_residual(eta1, eta2, s: float, delta: float | None = None) -> tuple[float, float]:
    """Finite-difference residual of ``-eta_i'' + eta_i - eta_j`` at radius ``s``."""
    if delta is None:
        delta = 1e-4 * max(1.0, s)
    if delta >= s:
        raise StepTooLarge(f"FD step {delta} must be smaller than s = {s}")
    # The second difference loses about log10(1/delta^2) digits to cancellation,
    # so it is formed in extended precision; profiles that only handle float64
    # still work, they just keep the double-precision noise floor.
    s, delta = np.longdouble(s), np.longdouble(delta)
    out = []
    for f, g in ((eta1, eta2), (eta2, eta1)):
        d2 = (f(s + delta) - 2 * f(s) + f(s - delta)) / delta**2
        out.append(float(-d2 + f(s) - g(s)))
    return out[0], out[1]


def barrier(alpha: float, R: float, x) -> tuple[float, float]:
    """Barrier ``w = exp(-alpha|x|^2) - exp(-alpha R^2)`` and ``-Lap_inf w`` on the annulus."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    r2 = float(np.sum(np.square(np.asarray(x, dtype=float))))
    if not (R / 2) ** 2 < r2 < R**2:
        raise OutOfAnnulus(f"|x| = {np.sqrt(r2)} not in ({R / 2}, {R})")
    e = np.exp(-alpha * r2)
    return float(e - np.exp(-alpha * R * R)), float(e * (2.0 * alpha - 4.0 * alpha**2 * r2))
