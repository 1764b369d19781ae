"""Spatial domains, lattices, coupled fields and epsilon-sphere probes.

Geometry routines are vectorized: points are ``(P, n)`` arrays.  A lattice
covers the bounding box of the domain plus one padding layer.  Nodes at
positive distance from the boundary are *interior* and carry unknowns; all
other nodes are *ghosts* whose values are the boundary data evaluated at the
node's nearest boundary point.  That substitution is what lets multilinear
interpolation work in cells straddling the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDomain, NotInterior, NotUnit, OutOfDomain, SpacingTooCoarse

# hit tolerance on the exit parameter; keeps |hit - x| <= eps + 1e-12
HIT_TOL = 1e-12
KINDS = ("interval", "ball", "box", "polygon2d")

BoundaryFn = Callable[[np.ndarray], np.ndarray]


def _as_points(x, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, n) if pts.size == n else pts.reshape(-1, 1)
    if pts.shape[1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {pts.shape}")
    return pts


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Bounded open domain U.  Build with the classmethod constructors."""

    kind: str
    center: np.ndarray | None = None
    radius: float | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    vertices: np.ndarray | None = None

    @classmethod
    def interval(cls, a: float, b: float) -> DomainSpec:
        if not a < b:
            raise DegenerateDomain(f"interval needs a < b, got ({a}, {b})")
        return cls("interval", lo=np.array([float(a)]), hi=np.array([float(b)]))

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> DomainSpec:
        if not radius > 0:
            raise DegenerateDomain(f"ball radius must be > 0, got {radius}")
        return cls("ball", center=np.array(center, dtype=float).reshape(-1), radius=float(radius))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> DomainSpec:
        lo_, hi_ = np.array(lo, dtype=float).reshape(-1), np.array(hi, dtype=float).reshape(-1)
        if lo_.shape != hi_.shape or np.any(lo_ >= hi_):
            raise DegenerateDomain(f"box needs lo < hi per coordinate, got {lo_} / {hi_}")
        return cls("box", lo=lo_, hi=hi_)

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]]) -> DomainSpec:
        V = np.array(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise DegenerateDomain("polygon2d needs at least 3 planar vertices")
        area = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1])
        if area <= 0:
            raise DegenerateDomain("polygon vertices must be counterclockwise with positive area")
        k = len(V)
        for a in range(k):
            for b in range(a + 1, k):
                if b == a + 1 or (a == 0 and b == k - 1):
                    continue
                if _segments_intersect(V[a], V[(a + 1) % k], V[b], V[(b + 1) % k]):
                    raise DegenerateDomain("polygon is not simple")
        return cls("polygon2d", vertices=V)

    @property
    def dim(self) -> int:
        if self.kind == "ball":
            return len(self.center)
        if self.kind == "polygon2d":
            return 2
        return len(self.lo)

    @property
    def smooth(self) -> bool:
        """False for domains with corners (box, polygon)."""
        return self.kind in ("interval", "ball")

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "ball":
            return self.center - self.radius, self.center + self.radius
        if self.kind == "polygon2d":
            return self.vertices.min(axis=0), self.vertices.max(axis=0)
        return self.lo.copy(), self.hi.copy()

    @property
    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        if self.kind == "polygon2d":
            V = self.vertices
            return float(np.max(np.linalg.norm(V[:, None, :] - V[None, :, :], axis=-1)))
        return float(np.linalg.norm(self.hi - self.lo))

    # -- distance, projection -------------------------------------------------

    def _edges(self):
        P = self.vertices
        return P, np.roll(P, -1, axis=0)

    def _edge_nearest(self, pts):
        A, B = self._edges()
        AB = B - A
        AP = pts[:, None, :] - A[None, :, :]
        t = np.clip(np.einsum("pke,ke->pk", AP, AB) / np.einsum("ke,ke->k", AB, AB), 0.0, 1.0)
        near = A[None] + t[..., None] * AB[None]
        d = np.linalg.norm(pts[:, None, :] - near, axis=-1)
        k = np.argmin(d, axis=1)
        idx = np.arange(len(pts))
        return d[idx, k], near[idx, k]

    def _polygon_inside(self, pts):
        A, B = self._edges()
        x, y = pts[:, 0:1], pts[:, 1:2]
        cond = (A[None, :, 1] > y) != (B[None, :, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = A[None, :, 0] + (y - A[None, :, 1]) * (B[None, :, 0] - A[None, :, 0]) / (B[None, :, 1] - A[None, :, 1])
        crossings = np.sum(cond & (x < xc), axis=1)
        return crossings % 2 == 1

    def signed_distance(self, x) -> np.ndarray:
        """Distance to the boundary, positive inside U and negative outside."""
        pts = _as_points(x, self.dim)
        if self.kind == "ball":
            return self.radius - np.linalg.norm(pts - self.center, axis=1)
        if self.kind == "polygon2d":
            d, _ = self._edge_nearest(pts)
            return np.where(self._polygon_inside(pts), d, -d)
        inner = np.minimum(pts - self.lo, self.hi - pts).min(axis=1)
        outer = np.linalg.norm(pts - np.clip(pts, self.lo, self.hi), axis=1)
        return np.where(outer > 0, -outer, inner)

    def project(self, x) -> np.ndarray:
        """Nearest boundary point of each point."""
        pts = _as_points(x, self.dim)
        if self.kind == "ball":
            d = pts - self.center
            r = np.linalg.norm(d, axis=1, keepdims=True)
            unit = np.zeros_like(d)
            unit[:, 0] = 1.0
            unit = np.where(r > 0, d / np.where(r > 0, r, 1.0), unit)
            return self.center + self.radius * unit
        if self.kind == "polygon2d":
            return self._edge_nearest(pts)[1]
        out = np.clip(pts, self.lo, self.hi)
        inside = np.all((pts > self.lo) & (pts < self.hi), axis=1)
        if np.any(inside):
            q = pts[inside]
            gaps = np.concatenate([q - self.lo, self.hi - q], axis=1)
            j = np.argmin(gaps, axis=1)
            n = self.dim
            rows = np.arange(len(q))
            coord = j % n
            q = q.copy()
            q[rows, coord] = np.where(j < n, self.lo[coord], self.hi[coord])
            out[inside] = q
        return out

    def exit_time(self, x, v) -> np.ndarray:
        """First ``t > 0`` with ``x + t v`` on the boundary, for interior ``x``."""
        pts = _as_points(x, self.dim)
        dirs = _as_points(v, self.dim)
        if self.kind == "ball":
            d = pts - self.center
            b = np.sum(d * dirs, axis=1)
            c = np.sum(d * d, axis=1) - self.radius**2
            return -b + np.sqrt(np.maximum(b * b - c, 0.0))
        if self.kind == "polygon2d":
            A, B = self._edges()
            E = B - A
            W = A[None] - pts[:, None, :]
            cross = lambda a, b: a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
            den = cross(dirs[:, None, :], E[None])
            with np.errstate(divide="ignore", invalid="ignore"):
                t = cross(W, E[None]) / den
                s = cross(W, dirs[:, None, :]) / den
            ok = (den != 0) & (t > 0) & (s >= -1e-12) & (s <= 1 + 1e-12)
            return np.where(ok, t, np.inf).min(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hi = np.where(dirs > 0, (self.hi - pts) / dirs, np.inf)
            t_lo = np.where(dirs < 0, (self.lo - pts) / dirs, np.inf)
        return np.minimum(t_hi, t_lo).min(axis=1)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "ball":
            d.update(center=self.center.tolist(), radius=self.radius)
        elif self.kind == "polygon2d":
            d.update(vertices=self.vertices.tolist())
        else:
            d.update(lo=self.lo.tolist(), hi=self.hi.tolist())
        return d


def clip_moves(spec: DomainSpec, x: np.ndarray, v: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized move without argument checks: returns (points, hit flags)."""
    t = spec.exit_time(x, v)
    hit = t <= eps + HIT_TOL
    step = np.where(hit, t, eps)
    y = x + step[:, None] * v
    if spec.kind == "ball" and np.any(hit):
        # land exactly on the sphere
        d = y[hit] - spec.center
        y[hit] = spec.center + spec.radius * d / np.linalg.norm(d, axis=1, keepdims=True)
    elif spec.kind in ("box", "interval") and np.any(hit):
        y[hit] = np.clip(y[hit], spec.lo, spec.hi)
    return y, hit


def boundary_hit(spec: DomainSpec, x, v, eps: float) -> tuple[np.ndarray, bool]:
    """Move from interior ``x`` a distance ``eps`` along unit ``v``, stopping at the boundary."""
    n = spec.dim
    x = np.asarray(x, dtype=float).reshape(1, n)
    v = np.asarray(v, dtype=float).reshape(1, n)
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise NotUnit(f"direction {v[0]} is not a unit vector")
    if spec.signed_distance(x)[0] <= 0:
        raise NotInterior(f"{x[0]} is not an interior point")
    y, hit = clip_moves(spec, x, v, eps)
    return y[0], bool(hit[0])


def directions(n: int, D: int) -> np.ndarray:
    """Probe directions: ``(-1, +1)`` in 1-D, offset uniform angles in 2-D."""
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if D < 2:
        raise ValueError("need at least 2 directions")
    if n == 2:
        theta = (np.arange(D) + 0.5) * (2.0 * np.pi / D)
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        # Fibonacci sphere
        k = np.arange(D) + 0.5
        z = 1.0 - 2.0 * k / D
        phi = np.pi * (1.0 + 5**0.5) * k
        rho = np.sqrt(1.0 - z * z)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    raise NotImplementedError("direction sets are only defined for n <= 3")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Regular grid over the padded bounding box of a domain."""

    spec: DomainSpec
    h: float
    origin: np.ndarray  # coordinates of grid index (0, ..., 0)
    shape: tuple[int, ...]
    coords: np.ndarray  # (N_all, n), C order over ``shape``
    distance: np.ndarray  # signed boundary distance per node
    interior: np.ndarray  # bool mask over all nodes

    @property
    def n(self) -> int:
        return len(self.shape)

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @cached_property
    def ghost_index(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    @property
    def interior_points(self) -> np.ndarray:
        return self.coords[self.interior]

    @cached_property
    def ghost_projection(self) -> np.ndarray:
        return self.spec.project(self.coords[self.ghost_index])

    @cached_property
    def strides(self) -> np.ndarray:
        return np.array([int(np.prod(self.shape[k + 1 :])) for k in range(self.n)], dtype=np.int64)

    def cell_weights(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Multilinear stencil: flat node indices and weights, each ``(P, 2**n)``."""
        rel = (pts - self.origin) / self.h
        base = np.floor(rel).astype(np.int64)
        hi = np.array(self.shape, dtype=np.int64) - 2
        base = np.clip(base, 0, hi)
        frac = rel - base
        corners = np.array(np.meshgrid(*[[0, 1]] * self.n, indexing="ij")).reshape(self.n, -1).T
        idx = (base[:, None, :] + corners[None]) @ self.strides
        w = np.prod(np.where(corners[None] == 1, frac[:, None, :], 1.0 - frac[:, None, :]), axis=2)
        return idx, w

    def interpolate_full(self, F: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of node arrays ``F (m, N_all)`` at ``pts``."""
        if self.n == 1:
            rel = (pts[:, 0] - self.origin[0]) / self.h
            i = np.clip(np.floor(rel).astype(np.int64), 0, self.shape[0] - 2)
            t = rel - i
            return F[:, i] * (1.0 - t) + F[:, i + 1] * t
        if self.n == 2:
            rx = (pts[:, 0] - self.origin[0]) / self.h
            ry = (pts[:, 1] - self.origin[1]) / self.h
            ix = np.clip(np.floor(rx).astype(np.int64), 0, self.shape[0] - 2)
            iy = np.clip(np.floor(ry).astype(np.int64), 0, self.shape[1] - 2)
            tx, ty = rx - ix, ry - iy
            k = ix * self.shape[1] + iy
            ny = self.shape[1]
            return (F[:, k] * (1.0 - tx) + F[:, k + ny] * tx) * (1.0 - ty) + (
                F[:, k + 1] * (1.0 - tx) + F[:, k + ny + 1] * tx
            ) * ty
        idx, w = self.cell_weights(pts)
        return np.einsum("mpc,pc->mp", F[:, idx], w)


def build_lattice(spec: DomainSpec, h: float) -> Lattice:
    if not h > 0:
        raise SpacingTooCoarse(f"spacing must be > 0, got {h}")
    diam = spec.diameter
    if h > diam / 4 + 1e-15:
        raise SpacingTooCoarse(f"spacing {h} exceeds diameter/4 = {diam / 4}")
    lo, hi = spec.bbox()
    counts = [int(math.ceil((b - a) / h - 1e-9)) + 1 for a, b in zip(lo, hi)]
    shape = tuple(c + 2 for c in counts)
    axes = [lo[k] + (np.arange(shape[k]) - 1) * h for k in range(len(shape))]
    grid = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.reshape(-1) for g in grid], axis=1)
    dist = spec.signed_distance(coords)
    interior = dist > h * 1e-9
    if not np.any(interior):
        raise DegenerateDomain("lattice has no interior nodes")
    return Lattice(spec, float(h), lo - h, shape, coords, dist, interior)


@dataclass(eq=False)
class CoupledField:
    """``m`` value functions on the interior nodes plus boundary data ``g``."""

    lattice: Lattice
    values: np.ndarray  # (m, N_interior)
    boundary: Sequence[BoundaryFn]
    ghost_values: np.ndarray = field(init=False)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.lattice.interior_index):
            raise ValueError("values must have shape (m, number of interior nodes)")
        if len(self.boundary) != self.values.shape[0]:
            raise ValueError("need one boundary function per mode")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        proj = self.lattice.ghost_projection
        self.ghost_values = np.array([np.asarray(g(proj), dtype=float) for g in self.boundary])

    @classmethod
    def from_function(cls, lattice: Lattice, fn: Callable[[np.ndarray], np.ndarray], boundary) -> CoupledField:
        """Sample ``fn(points) -> (m, P)`` on the interior nodes."""
        return cls(lattice, np.asarray(fn(lattice.interior_points)), boundary)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def domain(self) -> DomainSpec:
        return self.lattice.spec

    def full(self) -> np.ndarray:
        """Values on every lattice node, shape ``(m, N_all)``; cached, treat as read-only."""
        cached = self.__dict__.get("_full")
        if cached is None or cached[0] is not self.values:
            out = np.empty((self.m, len(self.lattice.coords)))
            out[:, self.lattice.interior_index] = self.values
            out[:, self.lattice.ghost_index] = self.ghost_values
            self._full = cached = (self.values, out)
        return cached[1]

    def with_values(self, values: np.ndarray) -> CoupledField:
        new = object.__new__(CoupledField)
        new.lattice = self.lattice
        new.values = np.asarray(values, dtype=float)
        new.boundary = self.boundary
        new.ghost_values = self.ghost_values
        return new

    def evaluate(self, pts) -> np.ndarray:
        """Interpolated values of all modes, shape ``(m, P)``; no domain check."""
        pts = _as_points(pts, self.lattice.n)
        return self.lattice.interpolate_full(self.full(), pts)

    def boundary_values(self, pts) -> np.ndarray:
        pts = _as_points(pts, self.lattice.n)
        return np.array([np.asarray(g(pts), dtype=float) * np.ones(len(pts)) for g in self.boundary])


def interpolate(field: CoupledField, i: int, x) -> float:
    """Multilinear interpolation of mode ``i`` at a point of the closed domain."""
    lat = field.lattice
    pts = _as_points(x, lat.n)
    if field.domain.signed_distance(pts)[0] < -lat.h * 1e-9:
        raise OutOfDomain(f"{pts[0]} lies outside the closed domain")
    return float(field.evaluate(pts)[i, 0])


def probe_values(field: CoupledField, weights: np.ndarray, x: np.ndarray, eps: float, dirs: np.ndarray) -> np.ndarray:
    """Combined field at the clipped probe points of each ``x``; returns ``(P, D)``.

    ``weights`` is either one distribution ``(m,)`` or one per point ``(P, m)``.
    Probes that reach the boundary use the boundary data instead of the field.
    """
    P, D = len(x), len(dirs)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w, (P, len(w)))
    lat = field.lattice
    if lat.n <= 2:
        from . import _kernels

        vals, hit, hitpts = _kernels.probe_kernel(
            np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(w), np.ascontiguousarray(dirs), float(eps),
            *_kernels.domain_args(field.domain), lat.origin, lat.h, np.array(lat.shape, dtype=np.int64), field.full(),
        )
        if np.any(hit):
            rows = np.nonzero(hit)[0]
            vals[hit] = np.einsum("pm,mp->p", w[rows], field.boundary_values(hitpts[hit]))
        return vals
    X = np.repeat(x, D, axis=0)
    V = np.tile(dirs, (P, 1))
    y, hit = clip_moves(field.domain, X, V, eps)
    vals = np.empty((field.m, len(y)))
    if np.any(~hit):
        vals[:, ~hit] = field.evaluate(y[~hit])
    if np.any(hit):
        vals[:, hit] = field.boundary_values(y[hit])
    return np.einsum("pm,mpd->pd", w, vals.reshape(field.m, P, D))


def sphere_probe(field: CoupledField, weights, x, eps: float, D: int = 64):
    """Max and min of the weighted field over the clipped eps-sphere around ``x``.

    Returns ``(max_val, min_val, argmax_dir, argmin_dir)``; ties go to the
    lowest direction index.
    """
    n = field.lattice.n
    x = _as_points(x, n)
    if field.domain.signed_distance(x)[0] <= 0:
        raise NotInterior(f"{x[0]} is not an interior point")
    rho = np.asarray(getattr(weights, "probabilities", weights), dtype=float)
    dirs = directions(n, D)
    vals = probe_values(field, rho, x, eps, dirs)[0]
    kmax, kmin = int(np.argmax(vals)), int(np.argmin(vals))
    return float(vals[kmax]), float(vals[kmin]), dirs[kmax], dirs[kmin]
