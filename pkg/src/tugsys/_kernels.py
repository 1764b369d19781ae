"""Compiled probe kernel for 1-D and 2-D lattices.

Computes, for each point and direction, the clipped move and the weighted
multilinear interpolation of the node values.  Boundary hits are reported
back so the caller can evaluate the (Python) boundary functions there.
"""

from __future__ import annotations

import numba as nb
import numpy as np

BALL, BOX, POLYGON = 0, 1, 2
HIT_TOL = 1e-12


@nb.njit(cache=True, inline="always")
def _exit_time(kind, px, py, vx, vy, n, center, radius, lo, hi, verts):
    # points are passed as scalars (py, vy unused in 1-D)
    if kind == BALL:
        dx = px - center[0]
        b = dx * vx
        c = dx * dx
        if n == 2:
            dy = py - center[1]
            b += dy * vy
            c += dy * dy
        c -= radius * radius
        disc = b * b - c
        if disc < 0.0:
            disc = 0.0
        return -b + np.sqrt(disc)
    if kind == BOX:
        t = np.inf
        if vx > 0:
            t = (hi[0] - px) / vx
        elif vx < 0:
            t = (lo[0] - px) / vx
        if n == 2:
            s = np.inf
            if vy > 0:
                s = (hi[1] - py) / vy
            elif vy < 0:
                s = (lo[1] - py) / vy
            if s < t:
                t = s
        return t
    t = np.inf
    nv = verts.shape[0]
    for e in range(nv):
        ax, ay = verts[e, 0], verts[e, 1]
        bx, by = verts[(e + 1) % nv, 0], verts[(e + 1) % nv, 1]
        ex, ey = bx - ax, by - ay
        wx, wy = ax - px, ay - py
        den = vx * ey - vy * ex
        if den == 0.0:
            continue
        te = (wx * ey - wy * ex) / den
        se = (wx * vy - wy * vx) / den
        if te > 0 and se >= -1e-12 and se <= 1 + 1e-12 and te < t:
            t = te
    return t


@nb.njit(cache=True)
def probe_kernel(points, weights, dirs, eps, kind, center, radius, lo, hi, verts, origin, h, shape, F):
    B, n = points.shape
    D = dirs.shape[0]
    m = F.shape[0]
    vals = np.empty((B, D))
    hit = np.zeros((B, D), dtype=np.bool_)
    hitpts = np.zeros((B, D, n))
    ny = shape[1] if n == 2 else 1
    for p in range(B):
        px = points[p, 0]
        py = points[p, 1] if n == 2 else 0.0
        for d in range(D):
            vx = dirs[d, 0]
            vy = dirs[d, 1] if n == 2 else 0.0
            t = _exit_time(kind, px, py, vx, vy, n, center, radius, lo, hi, verts)
            if t <= eps + HIT_TOL:
                yx = px + t * vx
                yy = py + t * vy
                if kind == BALL:
                    if n == 2:
                        nr = np.sqrt((yx - center[0]) ** 2 + (yy - center[1]) ** 2)
                        yx = center[0] + radius * (yx - center[0]) / nr
                        yy = center[1] + radius * (yy - center[1]) / nr
                    else:
                        yx = center[0] + radius * (1.0 if yx > center[0] else -1.0)
                elif kind == BOX:
                    yx = min(max(yx, lo[0]), hi[0])
                    if n == 2:
                        yy = min(max(yy, lo[1]), hi[1])
                hit[p, d] = True
                hitpts[p, d, 0] = yx
                if n == 2:
                    hitpts[p, d, 1] = yy
                vals[p, d] = np.nan
                continue
            yx = px + eps * vx
            rx = (yx - origin[0]) / h
            ix = min(max(int(np.floor(rx)), 0), shape[0] - 2)
            tx = rx - ix
            acc = 0.0
            if n == 1:
                for k in range(m):
                    acc += weights[p, k] * (F[k, ix] * (1.0 - tx) + F[k, ix + 1] * tx)
            else:
                yy = py + eps * vy
                ry = (yy - origin[1]) / h
                iy = min(max(int(np.floor(ry)), 0), shape[1] - 2)
                ty = ry - iy
                q = ix * ny + iy
                for k in range(m):
                    a = F[k, q] * (1.0 - tx) + F[k, q + ny] * tx
                    b = F[k, q + 1] * (1.0 - tx) + F[k, q + ny + 1] * tx
                    acc += weights[p, k] * (a * (1.0 - ty) + b * ty)
            vals[p, d] = acc
    return vals, hit, hitpts


def domain_args(spec):
    """Flatten a DomainSpec into kernel arguments."""
    n = spec.dim
    empty = np.zeros(n)
    if spec.kind == "ball":
        return BALL, spec.center, float(spec.radius), empty, empty, np.zeros((1, 2))
    if spec.kind == "polygon2d":
        return POLYGON, empty, 0.0, empty, empty, spec.vertices
    return BOX, empty, 0.0, spec.lo, spec.hi, np.zeros((1, 2))
