"""Mode-switching generator and exact transition distributions.

The mode process is a continuous-time Markov chain whose switching rate from
mode ``i`` to ``j`` is ``c[i, j] / 2``.  Distributions evolve by the forward
Kolmogorov equation ``d rho / ds = rho @ (c / 2)``, so the distribution after
time ``s`` started from mode ``i`` is row ``i`` of ``expm(s * c / 2)``.

Mode indices are 0-based throughout the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import ModeOutOfRange, NonpositiveOffDiagonal, NotSquare, RowSumViolation, GeneratorError

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    c: np.ndarray

    @property
    def m(self) -> int:
        return self.c.shape[0]

    def transition_matrix(self, s: float) -> np.ndarray:
        """Row-stochastic matrix ``P(s)`` with ``P[i, k] = rho_k^i(s)``."""
        if not np.isfinite(s) or s < 0:
            raise ValueError(f"time must be finite and >= 0, got {s}")
        P = expm(s * 0.5 * self.c)
        return np.clip(P, 0.0, 1.0)

    def tolist(self) -> list[list[float]]:
        return self.c.tolist()


def symmetric_generator(m: int = 2) -> GeneratorMatrix:
    """Uniform generator: off-diagonal 1, diagonal ``-(m - 1)``."""
    c = np.ones((m, m)) - m * np.eye(m)
    return validate_generator(c)


def validate_generator(raw) -> GeneratorMatrix:
    c = np.array(raw, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise NotSquare(f"generator must be a square matrix, got shape {c.shape}")
    m = c.shape[0]
    if m < 2:
        raise NotSquare("generator needs at least two modes")
    if not np.all(np.isfinite(c)):
        raise GeneratorError("generator entries must be finite")
    sums = c.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums) > ROW_SUM_TOL)
    if bad.size:
        i = int(bad[0])
        raise RowSumViolation(f"row {i + 1} sums to {sums[i]:.17g}, expected 0")
    off = ~np.eye(m, dtype=bool)
    if np.any(c[off] <= 0):
        i, j = np.argwhere(off & (c <= 0))[0]
        raise NonpositiveOffDiagonal(f"c[{i + 1},{j + 1}] = {c[i, j]:.17g} must be > 0")
    c.setflags(write=False)
    return GeneratorMatrix(c)


@dataclass(frozen=True, eq=False)
class ModeDistribution:
    probabilities: np.ndarray
    time: float

    def __len__(self) -> int:
        return len(self.probabilities)

    def __getitem__(self, k):
        return self.probabilities[k]


def _check_mode(g: GeneratorMatrix, i: int) -> int:
    if not 0 <= int(i) < g.m:
        raise ModeOutOfRange(f"mode {i} outside 0..{g.m - 1}")
    return int(i)


def mode_distribution(g: GeneratorMatrix, i: int, s: float) -> ModeDistribution:
    """Distribution of the mode at time ``s`` given it started in mode ``i``."""
    i = _check_mode(g, i)
    rho = g.transition_matrix(s)[i].copy()
    rho.setflags(write=False)
    return ModeDistribution(rho, float(s))


def sample_modes(P: np.ndarray, modes: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of next modes for arrays of current modes and uniforms."""
    cdf = np.cumsum(P, axis=1)[modes]
    k = np.sum(np.asarray(u)[:, None] >= cdf, axis=1)
    return np.minimum(k, P.shape[0] - 1)


def switch_sample(g: GeneratorMatrix, i: int, s: float, u: float) -> int:
    """Mode after elapsed time ``s``; deterministic in the uniform ``u``."""
    i = _check_mode(g, i)
    if s < 0:
        raise ValueError("elapsed time must be >= 0")
    P = g.transition_matrix(s)
    return int(sample_modes(P, np.array([i]), np.array([u]))[0])
