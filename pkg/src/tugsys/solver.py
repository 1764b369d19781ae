"""Fixed-point solver for the coupled dynamic programming principle.

For every interior node ``x`` and mode ``i`` one sweep computes::

    u_i(x) <- (1 - theta) u_i(x) + theta * (max_y v(y) + min_y v(y)) / 2,
    v(y) = sum_k rho_k^i(eps^2) u_k(y),

with ``y`` running over the clipped eps-sphere probes of ``x``.  Probe
locations never change, so the probe interpolation is assembled once into a
sparse matrix and each sweep is a sparse product followed by row max/min.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .domain import CoupledField, DomainSpec, Lattice, build_lattice, clip_moves, directions
from .errors import TooCloseToBoundary, ValidationError
from .markov import GeneratorMatrix

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class ProblemSpec:
    domain: DomainSpec
    generator: GeneratorMatrix
    boundary: Sequence[Callable[[np.ndarray], np.ndarray]]
    eps: float = 0.05
    h: float | None = None
    D: int = 64
    tol: float = 1e-8
    max_iters: int | None = None
    theta: float = 1.0

    def __post_init__(self):
        if self.h is None:
            self.h = self.eps / 4
        if not self.eps > 0:
            raise ValidationError("eps must be > 0")
        # in 1-D the two probes +-eps are axis aligned, so one cell of reach is enough
        min_ratio = 1 if self.domain.dim == 1 else 2
        if self.eps < min_ratio * self.h * (1 - 1e-12):
            raise ValidationError(f"eps = {self.eps} must be >= {min_ratio}h = {min_ratio * self.h}")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if not 0 < self.theta <= 1:
            raise ValidationError("damping theta must lie in (0, 1]")
        if len(self.boundary) != self.generator.m:
            raise ValidationError(f"need {self.generator.m} boundary functions, got {len(self.boundary)}")
        if self.domain.dim == 1:
            self.D = 2
        if self.max_iters is None:
            self.max_iters = int(10 * (self.domain.diameter / self.eps) ** 2)

    @cached_property
    def lattice(self) -> Lattice:
        return build_lattice(self.domain, self.h)

    @cached_property
    def directions(self) -> np.ndarray:
        return directions(self.domain.dim, self.D)

    @cached_property
    def rho(self) -> np.ndarray:
        """``rho[i, k] = rho_k^i(eps^2)``."""
        return self.generator.transition_matrix(self.eps**2)

    @cached_property
    def stencil(self) -> ProbeStencil:
        return ProbeStencil.build(self)

    def constant_field(self, values: Sequence[float]) -> CoupledField:
        n_int = len(self.lattice.interior_index)
        return CoupledField(self.lattice, np.outer(values, np.ones(n_int)), self.boundary)

    def initial_field(self) -> CoupledField:
        """Per-mode average of the boundary data over the ghost projections."""
        proj = self.lattice.ghost_projection
        means = [float(np.mean(np.asarray(g(proj), dtype=float) * np.ones(len(proj)))) for g in self.boundary]
        return self.constant_field(means)


@dataclass(frozen=True, eq=False)
class ProbeStencil:
    """Sparse map from node values to the ``N * D`` probe values of a lattice.

    Probes are linear in the node values, so the mode weights are applied on
    the nodes first and each mode costs a single sparse product.
    """

    W: sp.csr_matrix  # (N*D, N_all)
    boundary_values: np.ndarray  # (m, N*D) weighted boundary data, zero on non-hit rows
    n_nodes: int
    D: int

    @classmethod
    def build(cls, spec: ProblemSpec) -> ProbeStencil:
        lat = spec.lattice
        dirs = spec.directions
        X = lat.interior_points
        N, D = len(X), len(dirs)
        y, hit = clip_moves(spec.domain, np.repeat(X, D, axis=0), np.tile(dirs, (N, 1)), spec.eps)
        rows = np.flatnonzero(~hit)
        idx, w = lat.cell_weights(y[rows])
        ncorner = idx.shape[1]
        W = sp.csr_matrix(
            (w.reshape(-1), (np.repeat(rows, ncorner), idx.reshape(-1))),
            shape=(N * D, len(lat.coords)),
        )
        G = np.zeros((spec.generator.m, N * D))
        if np.any(hit):
            yh = y[hit]
            G[:, hit] = [np.asarray(g(yh), dtype=float) * np.ones(len(yh)) for g in spec.boundary]
        return cls(W, np.ascontiguousarray(spec.rho @ G), N, D)

    def extremes(self, full: np.ndarray, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Max and min of the combined probes per node; each ``(m, N)``.

        ``rho`` must be the matrix the stencil was built with.
        """
        V = rho @ full
        m = len(V)
        hi = np.empty((m, self.n_nodes))
        lo = np.empty((m, self.n_nodes))
        for i in range(m):
            comb = (self.W @ V[i] + self.boundary_values[i]).reshape(self.n_nodes, self.D)
            comb.max(axis=1, out=hi[i])
            comb.min(axis=1, out=lo[i])
        return hi, lo


def _half_sum(field: CoupledField, spec: ProblemSpec) -> np.ndarray:
    hi, lo = spec.stencil.extremes(field.full(), spec.rho)
    return 0.5 * (hi + lo)


def dpp_sweep(field: CoupledField, spec: ProblemSpec) -> tuple[CoupledField, float]:
    """One Jacobi sweep; returns the new field and the sup-norm change."""
    target = _half_sum(field, spec)
    theta = spec.theta
    new = target if theta == 1.0 else (1.0 - theta) * field.values + theta * target
    delta = float(np.max(np.abs(new - field.values)))
    return field.with_values(new), delta


def dpp_residual(field: CoupledField, spec: ProblemSpec) -> float:
    return float(np.max(np.abs(field.values - _half_sum(field, spec))))


@dataclass
class SolveReport:
    field: CoupledField
    iterations: int
    delta: float
    residual: float
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "delta": self.delta,
            "residual": self.residual,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def solve(spec: ProblemSpec, initial: CoupledField | None = None) -> SolveReport:
    """Iterate sweeps until the change drops to ``spec.tol`` or ``max_iters`` is hit."""
    field = initial if initial is not None else spec.initial_field()
    history = []
    delta = np.inf
    it = 0
    while it < spec.max_iters:
        field, delta = dpp_sweep(field, spec)
        it += 1
        history.append(delta)
        if delta <= spec.tol:
            break
        if it % 1000 == 0:
            logger.info("sweep %d: delta %.3e", it, delta)
    converged = delta <= spec.tol
    if not converged:
        logger.warning("not converged after %d sweeps (delta %.3e)", it, delta)
    return SolveReport(field, it, float(delta), dpp_residual(field, spec), converged, history)


def _derivatives(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float):
    """Central-difference values, gradients and Hessians of all modes at ``x``."""
    n = len(x)
    E = np.eye(n) * h
    stencil = [x]
    for j in range(n):
        stencil += [x + E[j], x - E[j]]
    for j in range(n):
        for k in range(j + 1, n):
            stencil += [x + E[j] + E[k], x + E[j] - E[k], x - E[j] + E[k], x - E[j] - E[k]]
    vals = np.asarray(fn(np.array(stencil)), dtype=float)  # (m, S)
    u0 = vals[:, 0]
    grad = np.empty((vals.shape[0], n))
    hess = np.empty((vals.shape[0], n, n))
    for j in range(n):
        fp, fm = vals[:, 1 + 2 * j], vals[:, 2 + 2 * j]
        grad[:, j] = (fp - fm) / (2 * h)
        hess[:, j, j] = (fp - 2 * u0 + fm) / h**2
    pos = 1 + 2 * n
    for j in range(n):
        for k in range(j + 1, n):
            pp, pm, mp, mm = (vals[:, pos + t] for t in range(4))
            hess[:, j, k] = hess[:, k, j] = (pp - pm - mp + mm) / (4 * h * h)
            pos += 4
    return u0, grad, hess


def pde_residual(pair, x, h_fd: float = 1e-3) -> tuple[float, float]:
    """Residual of the gradient-multiplied two-mode system at ``x``.

    ``r_i = -Du_i^T D^2u_i Du_i + |Du_i|^2 (u_i - u_j)`` with central
    differences of step ``h_fd``.  ``pair`` is anything with
    ``evaluate(points) -> (2, P)`` and an optional ``domain``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    domain = getattr(pair, "domain", None)
    if domain is not None and domain.signed_distance(x.reshape(1, -1))[0] <= h_fd:
        raise TooCloseToBoundary(f"{x} is within {h_fd} of the boundary")
    u, g, H = _derivatives(pair.evaluate, x, h_fd)
    res = []
    for i, j in ((0, 1), (1, 0)):
        res.append(float(-g[i] @ H[i] @ g[i] + (g[i] @ g[i]) * (u[i] - u[j])))
    return res[0], res[1]
