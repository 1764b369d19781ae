"""Monte Carlo simulation of epsilon tug-of-war with Markov mode switching.

Each step a fair coin picks the player who moves, the token moves up to
``eps`` in the chosen direction (stopping on the boundary), and the mode is
resampled from ``rho^mode(eps^2)``.  The game pays ``g_mode(x)`` when the
token reaches the boundary.

Episodes run in lockstep as numpy batches.  Randomness comes from a
counter-based hash of ``(seed, episode, step, stream)``, so every episode
owns an independent stream and results do not depend on batch layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import CoupledField, clip_moves, probe_values
from .errors import NotInterior, StalledGame, ValidationError
from .markov import sample_modes
from .solver import ProblemSpec

MAX_STEPS = 10**7

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, episodes: np.ndarray, step: int, stream: int) -> np.ndarray:
    """Uniform [0, 1) draws keyed by (seed, episode, step, stream)."""
    ep = np.asarray(episodes, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix(np.full(ep.shape, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
        h = _mix(h ^ (ep * _GOLDEN + np.uint64(1)))
        h = _mix(h ^ np.uint64((2 * step + stream + 1) & 0xFFFFFFFFFFFFFFFF))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class Strategy:
    """Markovian strategy: maps current points and modes to unit directions."""

    name = "strategy"

    def directions(self, points: np.ndarray, modes: np.ndarray, spec: ProblemSpec) -> np.ndarray:
        raise NotImplementedError


class _Greedy(Strategy):
    sign = 1.0

    def __init__(self, field: CoupledField):
        self.field = field

    def directions(self, points, modes, spec):
        dirs = spec.directions
        vals = probe_values(self.field, spec.rho[modes], points, spec.eps, dirs)
        k = np.argmax(vals, axis=1) if self.sign > 0 else np.argmin(vals, axis=1)
        return dirs[k]


class GreedyMax(_Greedy):
    """Move toward the largest combined value on the eps-sphere."""

    name = "greedy-max"


class GreedyMin(_Greedy):
    """Move toward the smallest combined value on the eps-sphere."""

    name = "greedy-min"
    sign = -1.0


class PullToPoint(Strategy):
    name = "pull-to-point"

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float).reshape(-1)

    def directions(self, points, modes, spec):
        d = self.target - points
        norm = np.linalg.norm(d, axis=1, keepdims=True)
        fallback = np.zeros_like(d)
        fallback[:, 0] = 1.0
        return np.where(norm > 0, d / np.where(norm > 0, norm, 1.0), fallback)


@dataclass
class GameTrace:
    start: np.ndarray
    start_mode: int
    points: np.ndarray  # (steps + 1, n), starting point first
    modes: np.ndarray  # (steps + 1,)
    coins: np.ndarray  # (steps,), True when player I won the toss
    payoff: float

    @property
    def steps(self) -> int:
        return len(self.coins)

    @property
    def terminal_point(self) -> np.ndarray:
        return self.points[-1]

    @property
    def terminal_mode(self) -> int:
        return int(self.modes[-1])

    def rows(self):
        """CSV rows ``(step, x..., mode, coin)``; coin is empty for the start row."""
        for k, (p, m) in enumerate(zip(self.points, self.modes)):
            coin = "" if k == 0 else ("I" if self.coins[k - 1] else "II")
            yield (k, *p.tolist(), int(m), coin)


@dataclass
class ValueEstimate:
    mean: float
    stderr: float
    N: int
    eps: float
    mode: int
    start: np.ndarray
    seed: int
    payoffs: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "N": self.N,
            "eps": self.eps,
            "mode": self.mode,
            "start": np.asarray(self.start).tolist(),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _run(spec, s_I, s_II, x0, i0, seed, episodes, record=False, max_steps=MAX_STEPS):
    """Play the given episode ids to termination.  Returns payoffs and optional paths."""
    n = spec.domain.dim
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if spec.domain.signed_distance(x0.reshape(1, n))[0] <= 0:
        raise NotInterior(f"start point {x0} is not interior")
    if not 0 <= i0 < spec.generator.m:
        raise ValidationError(f"start mode {i0} out of range")
    episodes = np.asarray(episodes, dtype=np.int64)
    B = len(episodes)
    x = np.tile(x0, (B, 1))
    mode = np.full(B, i0, dtype=np.int64)
    alive = np.arange(B)
    payoff = np.empty(B)
    paths = [[(x0.copy(), i0, None)] for _ in range(B)] if record else None
    P = spec.rho
    step = 0
    while len(alive):
        if step >= max_steps:
            raise StalledGame(f"episode exceeded {max_steps} steps", int(episodes[alive[0]]))
        ep = episodes[alive]
        coin = uniforms(seed, ep, step, 0) < 0.5
        xa, ma = x[alive], mode[alive]
        v = np.empty_like(xa)
        if np.any(coin):
            v[coin] = s_I.directions(xa[coin], ma[coin], spec)
        if np.any(~coin):
            v[~coin] = s_II.directions(xa[~coin], ma[~coin], spec)
        y, hit = clip_moves(spec.domain, xa, v, spec.eps)
        new_mode = sample_modes(P, ma, uniforms(seed, ep, step, 1))
        x[alive], mode[alive] = y, new_mode
        if record:
            for j, b in enumerate(alive):
                paths[b].append((y[j].copy(), int(new_mode[j]), bool(coin[j])))
        if np.any(hit):
            done = alive[hit]
            yd, md = y[hit], new_mode[hit]
            for k in np.unique(md):
                sel = md == k
                payoff[done[sel]] = np.asarray(spec.boundary[k](yd[sel]), dtype=float) * np.ones(int(sel.sum()))
            alive = alive[~hit]
        step += 1
    return payoff, paths


def play_episode(spec: ProblemSpec, s_I: Strategy, s_II: Strategy, x0, i0: int, seed: int,
                 episode: int = 0, max_steps: int = MAX_STEPS) -> GameTrace:
    """Play one episode; deterministic in ``(seed, episode)``."""
    payoff, paths = _run(spec, s_I, s_II, x0, i0, seed, [episode], record=True, max_steps=max_steps)
    path = paths[0]
    return GameTrace(
        start=np.asarray(x0, dtype=float).reshape(-1),
        start_mode=int(i0),
        points=np.array([p for p, _, _ in path]),
        modes=np.array([m for _, m, _ in path]),
        coins=np.array([c for _, _, c in path[1:]], dtype=bool),
        payoff=float(payoff[0]),
    )


def estimate_value(spec: ProblemSpec, s_I: Strategy, s_II: Strategy, x0, i0: int, N: int, seed: int,
                   batch: int = 16384, max_steps: int = MAX_STEPS) -> ValueEstimate:
    """Mean payoff and standard error over episodes ``0 .. N-1``."""
    if N < 2:
        raise ValidationError("need at least 2 episodes")
    payoffs = np.empty(N)
    for start in range(0, N, batch):
        ids = np.arange(start, min(N, start + batch))
        payoffs[ids], _ = _run(spec, s_I, s_II, x0, i0, seed, ids, max_steps=max_steps)
    # exactly rounded sums: the result does not depend on summation order
    mean = math.fsum(payoffs) / N
    stderr = math.sqrt(math.fsum((payoffs - mean) ** 2) / (N - 1) / N)
    return ValueEstimate(mean, stderr, N, spec.eps, int(i0), np.asarray(x0, dtype=float).reshape(-1), int(seed), payoffs)
