"""Slope statistics and structural checks for two-mode solution pairs.

Every routine accepts a *pair*: any object with ``evaluate(points) -> (2, P)``
and an optional ``domain`` used for containment checks.  Both
:class:`~tugsys.domain.CoupledField` (lattice data, interpolated) and
:class:`~tugsys.exact.ClosedFormPair` qualify.  Sphere extrema are taken over
``K`` uniformly spaced directions, the same direction set the solver uses.

Checks that hold exactly in the continuum get a tolerance of ``1e-9`` on
closed forms and ``5h`` on lattice fields.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .domain import directions
from .errors import BallNotContained, RadiusOrder, ValidationError
from .exact import SQRT2, cone_eval, fit_cone
from .solver import _derivatives

DEFAULT_K = 256


def default_tolerance(pair, factor: float = 5.0) -> float:
    lattice = getattr(pair, "lattice", None)
    return factor * lattice.h if lattice is not None else 1e-9


def _center(x0) -> np.ndarray:
    return np.asarray(x0, dtype=float).reshape(-1)


def _check_ball(pair, x0: np.ndarray, r: float) -> None:
    domain = getattr(pair, "domain", None)
    if domain is not None and domain.signed_distance(x0.reshape(1, -1))[0] < r - 1e-12:
        raise BallNotContained(f"closed ball B({x0.tolist()}, {r}) leaves the domain")


def xi(r):
    """``(exp(sqrt2 r) - exp(-sqrt2 r)) / r``."""
    return (np.exp(SQRT2 * r) - np.exp(-SQRT2 * r)) / r


@dataclass
class SlopeReport:
    center: np.ndarray
    radius: float
    u0: np.ndarray  # u_i(x0)
    M: np.ndarray  # sphere max per mode
    m: np.ndarray  # sphere min per mode
    S_plus: np.ndarray
    S_minus: np.ndarray
    SC_plus: np.ndarray
    SC_minus: np.ndarray
    samples: int

    @property
    def a(self) -> float:
        """Slope coefficient of the fitted generalized cone."""
        return float((self.M.sum() - self.u0.sum()) / (2.0 * self.radius))

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


def slope_stats(pair, x0, r: float, K: int = DEFAULT_K) -> SlopeReport:
    x0 = _center(x0)
    if not r > 0:
        raise RadiusOrder("radius must be > 0")
    if len(x0) > 1 and K < 16:
        raise ValidationError("need at least 16 sphere samples")
    _check_ball(pair, x0, r)
    dirs = directions(len(x0), K)
    vals = pair.evaluate(np.vstack([x0, x0 + r * dirs]))
    u0, sphere = vals[:, 0], vals[:, 1:]
    M, m = sphere.max(axis=1), sphere.min(axis=1)
    S_plus, S_minus = (M - u0) / r, (m - u0) / r
    coupling = 0.5 * (u0 - u0[::-1]) * (1.0 - np.exp(-SQRT2 * r)) / r
    return SlopeReport(x0, float(r), u0, M, m, S_plus, S_minus, S_plus + coupling, S_minus + coupling, len(dirs))


def check_lemma_Ll(pair, x0, s: float, r: float, K: int = DEFAULT_K) -> tuple[np.ndarray, np.ndarray]:
    """Slack of the coupled slope inequalities between radii ``s <= r``.

    Returns ``(slack_plus, slack_minus)`` per mode; nonnegative slack means
    the inequality holds.
    """
    if not 0 < s <= r:
        raise RadiusOrder(f"need 0 < s <= r, got s={s}, r={r}")
    inner, outer = slope_stats(pair, x0, s, K), slope_stats(pair, x0, r, K)
    q = xi(s) / xi(r)
    wi, wj = 0.5 * (1.0 + q), 0.5 * (1.0 - q)
    rhs_plus = wi * outer.SC_plus + wj * outer.SC_plus[::-1]
    rhs_minus = wi * outer.SC_minus + wj * outer.SC_minus[::-1]
    return rhs_plus - inner.SC_plus, inner.SC_minus - rhs_minus


def check_a_monotone(pair, x0, radii: Sequence[float], K: int = DEFAULT_K, tol: float | None = None):
    """Cone slope ``a(x0, r)`` along increasing radii, and whether it is nondecreasing."""
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise RadiusOrder("radii must be strictly increasing")
    tol = default_tolerance(pair) if tol is None else tol
    a = [slope_stats(pair, x0, r, K).a for r in radii]
    return a, bool(np.all(np.diff(a) >= -tol))


def _ball_samples(n: int, K: int, rings: int) -> np.ndarray:
    """Origin plus ``rings`` concentric spheres of ``K`` directions in the unit ball."""
    dirs = directions(n, K)
    fr = np.arange(1, rings + 1) / rings
    return np.vstack([np.zeros((1, n)), (fr[:, None, None] * dirs[None]).reshape(-1, n)])


def cone_comparison_check(pair, x0, r: float, K: int = DEFAULT_K, rings: int = 16) -> float:
    """Largest excess ``u_i - psi_i`` over the ball for the cone fitted at ``(x0, r)``."""
    x0 = _center(x0)
    rep = slope_stats(pair, x0, r, K)
    cone = fit_cone(rep.u0[0], rep.u0[1], rep.M[0], rep.M[1], r, x0=x0)
    pts = x0 + r * _ball_samples(len(x0), K, rings)
    u = pair.evaluate(pts)
    psi = np.stack(cone_eval(cone, pts))
    return float(np.max(u - psi))


def lipschitz_bound_check(pair, x0, r: float, h_fd: float = 1e-4, K: int = DEFAULT_K):
    """Compare ``|Du_1(x0)|`` with the bound from sphere slopes plus coupling.

    Returns ``(gradient norm, bound, slack)``.
    """
    x0 = _center(x0)
    _check_ball(pair, x0, max(r, h_fd))
    rep = slope_stats(pair, x0, r, K)
    _, grad, _ = _derivatives(pair.evaluate, x0, h_fd)
    g = float(np.linalg.norm(grad[0]))
    bound = float(max(np.abs(rep.S_plus).max(), np.abs(rep.S_minus).max()) + SQRT2 * abs(rep.u0[0] - rep.u0[1]))
    return g, bound, bound - g


def _richardson(radii: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linear extrapolation to r = 0 from the two smallest radii."""
    order = np.argsort(radii)
    r1, r2 = radii[order[0]], radii[order[1]]
    v1, v2 = values[order[0]], values[order[1]]
    return v1 - (v2 - v1) * r1 / (r2 - r1)


def running_sup(values_by_radius: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """``L(R) = sup_{s <= R} S(s)`` along the given radii (any order)."""
    order = np.argsort(radii)
    out = np.empty_like(values_by_radius)
    out[order] = np.maximum.accumulate(values_by_radius[order], axis=0)
    return out


@dataclass
class BlowupReport:
    center: np.ndarray
    radii: np.ndarray
    residuals: np.ndarray  # (R, m) max affine-fit residual of the rescaled field
    slopes: np.ndarray  # (R, m, n) fitted gradient
    S_plus: np.ndarray  # (R, m)
    L: np.ndarray  # (R, m) running sup of S_plus
    S_plus_limit: np.ndarray  # (m,)

    @property
    def slope_norms(self) -> np.ndarray:
        return np.linalg.norm(self.slopes, axis=2)

    @property
    def residual_ratios(self) -> np.ndarray:
        return self.residuals[1:] / self.residuals[:-1]

    @property
    def decreasing(self) -> np.ndarray:
        return np.all(np.diff(self.residuals, axis=0) < 0, axis=0)

    def to_dict(self) -> dict:
        d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}
        d["decreasing"] = self.decreasing.tolist()
        return d


def blowup_deviation(pair, x0, radii: Sequence[float], K: int = 64, rings: int = 4) -> BlowupReport:
    """Affine-fit deviation of the rescalings ``(u(x0 + r x) - u(x0)) / r`` on the unit ball."""
    x0 = _center(x0)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0):
        raise RadiusOrder("blow-up radii must be strictly decreasing")
    lattice = getattr(pair, "lattice", None)
    if lattice is not None and radii.min() < 4 * lattice.h:
        raise RadiusOrder(f"radii must be >= 4h = {4 * lattice.h} on lattice data")
    n = len(x0)
    X = _ball_samples(n, K, rings)
    A = np.hstack([np.ones((len(X), 1)), X])
    res, slopes, S = [], [], []
    for r in radii:
        _check_ball(pair, x0, r)
        u = pair.evaluate(x0 + r * X)
        v = (u - u[:, :1]) / r
        coef, *_ = np.linalg.lstsq(A, v.T, rcond=None)
        res.append(np.max(np.abs(A @ coef - v.T), axis=0))
        slopes.append(coef[1:].T)
        S.append(slope_stats(pair, x0, r, DEFAULT_K).S_plus)
    S = np.array(S)
    return BlowupReport(x0, radii, np.array(res), np.array(slopes), S, running_sup(S, radii), _richardson(radii, S))


def symmetric_slope_check(pair, x0, radii: Sequence[float], K: int = DEFAULT_K):
    """Extrapolated ``S^+(x0)``, ``S^-(x0)`` and the defect ``|S^+ + S^-|`` per mode."""
    radii = np.asarray(radii, dtype=float)
    reps = [slope_stats(pair, x0, r, K) for r in radii]
    sp = _richardson(radii, np.array([q.S_plus for q in reps]))
    sm = _richardson(radii, np.array([q.S_minus for q in reps]))
    return sp, sm, np.abs(sp + sm)
