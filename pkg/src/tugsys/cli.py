"""Command-line front end: ``tugsys <subcommand> --config FILE [--out DIR] [--seed N]``.

The config is an INI file (see ``docs/config.md``).  Subcommands:

* ``solve``    field CSV, summary JSON and one PGM heatmap per mode (2-D only)
* ``simulate`` Monte Carlo estimate JSON, optional trace CSV
* ``analyze``  slope/blow-up report JSON and ladder CSV
* ``cones``    table of a generalized cone and its refit
* ``markov``   table of transition probabilities over a time grid

Exit codes: 0 success, 1 validation failure, 2 solver did not converge,
3 any other runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .domain import DomainSpec
from .errors import TugsysError, ValidationError
from .exact import ConePair, cone_eval, example1_pair, fit_cone
from .expr import parse_boundary_expr
from .game import GreedyMax, GreedyMin, estimate_value, play_episode
from .markov import validate_generator
from .solver import ProblemSpec, solve

log = logging.getLogger("tugsys")

EXIT_OK, EXIT_VALIDATION, EXIT_NOT_CONVERGED, EXIT_RUNTIME = 0, 1, 2, 3
SUBCOMMANDS = ("solve", "simulate", "analyze", "cones", "markov")


def fmt(v) -> str:
    """Fixed 17-significant-digit decimal, enough to round-trip any double."""
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path: Path, payload: dict, timestamp: bool = True) -> None:
    """Sorted-key JSON; the wall-clock time lives only under ``"timestamp"``."""
    payload = dict(payload)
    if timestamp:
        payload["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    path.write_text(json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_pgm(path: Path, image: np.ndarray) -> None:
    """Binary 8-bit greyscale (P5); ``image`` rows are written top to bottom."""
    h, w = image.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + image.astype(np.uint8).tobytes())


def heatmap(lattice, full_values: np.ndarray) -> np.ndarray:
    """Map interior node values linearly onto 0..255; exterior nodes are mid-grey."""
    grid = np.full(lattice.shape, 128, dtype=np.uint8).reshape(-1)
    v = full_values[lattice.interior_index]
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    grid[lattice.interior_index] = np.rint((v - lo) * scale).astype(np.uint8)
    # axis 0 is x, axis 1 is y; show y upward
    return grid.reshape(lattice.shape).T[::-1]


# ---------------------------------------------------------------- config


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


@dataclass
class RunConfig:
    problem: ProblemSpec
    expressions: list[str]
    raw: configparser.ConfigParser

    def get(self, section: str, key: str, fallback=None):
        return self.raw.get(section, key, fallback=fallback)

    def floats(self, section: str, key: str, fallback=None):
        text = self.raw.get(section, key, fallback=None)
        return fallback if text is None else _floats(text)


def parse_domain(sec) -> DomainSpec:
    kind = sec.get("kind", "ball").strip()
    if kind == "interval":
        lo, hi = _floats(sec["lo"])[0], _floats(sec["hi"])[0]
        return DomainSpec.interval(lo, hi)
    if kind == "ball":
        return DomainSpec.ball(_floats(sec.get("center", "0, 0")), float(sec.get("radius", "1")))
    if kind == "box":
        return DomainSpec.box(_floats(sec["lo"]), _floats(sec["hi"]))
    if kind == "polygon":
        verts = [_floats(v) for v in sec["vertices"].split(";") if v.strip()]
        return DomainSpec.polygon(verts)
    raise ValidationError(f"unknown domain kind {kind!r}")


def load_config(path) -> RunConfig:
    raw = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            raw.read_file(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from exc
    for section in ("domain", "markov", "boundary"):
        if not raw.has_section(section):
            raise ValidationError(f"config lacks [{section}]")
    try:
        domain = parse_domain(raw["domain"])
        mk = raw["markov"]
        m = int(mk.get("m", "2"))
        c = _floats(mk["c"]) if "c" in mk else None
        if c is None:
            gen = validate_generator(np.ones((m, m)) - m * np.eye(m))
        else:
            if len(c) != m * m:
                raise ValidationError(f"[markov] c needs {m * m} entries, got {len(c)}")
            gen = validate_generator(np.reshape(c, (m, m)))
        exprs = [raw["boundary"].get(f"g{k + 1}") for k in range(m)]
        if any(e is None for e in exprs):
            raise ValidationError(f"[boundary] needs g1 .. g{m}")
        boundary = [parse_boundary_expr(e) for e in exprs]
        sv = raw["solver"] if raw.has_section("solver") else {}
        eps = float(sv.get("eps", "0.05"))
        problem = ProblemSpec(
            domain,
            gen,
            boundary,
            eps=eps,
            h=float(sv["h"]) if "h" in sv else None,
            D=int(sv.get("D", "64")),
            tol=float(sv.get("tol", "1e-8")),
            max_iters=int(sv["max_iters"]) if "max_iters" in sv else None,
            theta=float(sv.get("theta", "1.0")),
        )
    except KeyError as exc:
        raise ValidationError(f"missing config key {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(str(exc)) from exc
    return RunConfig(problem, exprs, raw)


# ---------------------------------------------------------------- subcommands


def _problem_dict(cfg: RunConfig) -> dict:
    p = cfg.problem
    return {
        "domain": p.domain.to_dict(),
        "generator": p.generator.tolist(),
        "boundary": cfg.expressions,
        "eps": p.eps,
        "h": p.h,
        "D": p.D,
        "tol": p.tol,
        "max_iters": p.max_iters,
        "theta": p.theta,
    }


def cmd_solve(cfg: RunConfig, out: Path, seed: int) -> int:
    rep = solve(cfg.problem)
    lat = cfg.problem.lattice
    X = lat.interior_points
    m = rep.field.m
    coord_names = ["x", "y", "z"][: lat.n]
    write_csv(out / "field.csv", coord_names + [f"u{k + 1}" for k in range(m)],
              (list(X[j]) + list(rep.field.values[:, j]) for j in range(len(X))))
    write_json(out / "summary.json", {"problem": _problem_dict(cfg), "solve": rep.summary(), "nodes": len(X)})
    heat = cfg.raw.getboolean("output", "heatmap", fallback=True)
    if lat.n == 2 and heat:
        full = rep.field.full()
        for k in range(m):
            write_pgm(out / f"u{k + 1}.pgm", heatmap(lat, full[k]))
    if not rep.converged:
        log.error("solver did not converge: %d sweeps, last change %.3e", rep.iterations, rep.delta)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _start(cfg: RunConfig, section: str):
    n = cfg.problem.domain.dim
    x0 = cfg.floats(section, "x0", [0.0] * n)
    if len(x0) != n:
        raise ValidationError(f"[{section}] x0 must have {n} coordinates")
    return np.array(x0)


def _mode(cfg: RunConfig, section: str) -> int:
    # config modes are 1-based, matching the g1, g2, ... keys
    k = int(cfg.get(section, "mode", "1"))
    if not 1 <= k <= cfg.problem.generator.m:
        raise ValidationError(f"[{section}] mode must lie in 1..{cfg.problem.generator.m}")
    return k - 1


def cmd_simulate(cfg: RunConfig, out: Path, seed: int) -> int:
    x0, i0 = _start(cfg, "game"), _mode(cfg, "game")
    N = int(cfg.get("game", "episodes", "1000"))
    rep = solve(cfg.problem)
    sI, sII = GreedyMax(rep.field), GreedyMin(rep.field)
    est = estimate_value(cfg.problem, sI, sII, x0, i0, N, seed)
    payload = est.to_dict()
    payload["mode"] = i0 + 1
    payload["solver_value"] = float(rep.field.evaluate(x0.reshape(1, -1))[i0, 0])
    payload["solver_converged"] = rep.converged
    payload["strategies"] = [sI.name, sII.name]
    write_json(out / "estimates.json", payload)
    if cfg.raw.getboolean("game", "trace", fallback=False):
        tr = play_episode(cfg.problem, sI, sII, x0, i0, seed, episode=0)
        rows = ((*r[:-2], r[-2] + 1, r[-1]) for r in tr.rows())
        write_csv(out / "trace.csv", ["step", *["x", "y", "z"][: len(x0)], "mode", "coin"], rows)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _analysis_pair(cfg: RunConfig):
    source = cfg.get("analysis", "source", "solve")
    if source == "example1":
        return example1_pair(cfg.problem.domain.dim), EXIT_OK
    if source == "cone":
        return _cone(cfg).as_pair(), EXIT_OK
    if source == "solve":
        rep = solve(cfg.problem)
        return rep.field, (EXIT_OK if rep.converged else EXIT_NOT_CONVERGED)
    raise ValidationError(f"[analysis] source must be solve, example1 or cone, not {source!r}")


def cmd_analyze(cfg: RunConfig, out: Path, seed: int) -> int:
    pair, status = _analysis_pair(cfg)
    x0 = _start(cfg, "analysis")
    radii = cfg.floats("analysis", "radii", [0.4, 0.2, 0.1, 0.05])
    K = int(cfg.get("analysis", "K", str(analysis.DEFAULT_K)))
    inc = sorted(radii)
    blow = analysis.blowup_deviation(pair, x0, sorted(radii, reverse=True))
    sp, sm, defect = analysis.symmetric_slope_check(pair, x0, radii, K)
    a, mono = analysis.check_a_monotone(pair, x0, inc, K)
    slack_p, slack_m = analysis.check_lemma_Ll(pair, x0, inc[0], inc[-1], K)
    grad, bound, lslack = analysis.lipschitz_bound_check(pair, x0, inc[-1], K=K)
    report = {
        "center": x0,
        "radii": inc,
        "K": K,
        "slopes": [analysis.slope_stats(pair, x0, r, K).to_dict() for r in inc],
        "a": a,
        "a_nondecreasing": mono,
        "coupled_slack": {"s": inc[0], "r": inc[-1], "plus": slack_p, "minus": slack_m},
        "cone_violation": analysis.cone_comparison_check(pair, x0, inc[-1], K),
        "lipschitz": {"gradient": grad, "bound": bound, "slack": lslack},
        "blowup": blow.to_dict(),
        "symmetric": {"S_plus": sp, "S_minus": sm, "defect": defect},
    }
    write_json(out / "report.json", report)
    m = blow.S_plus.shape[1]
    rows = []
    for k, r in enumerate(blow.radii):
        rows.append([float(r)] + [float(v) for v in blow.residuals[k]] + [float(v) for v in blow.slope_norms[k]]
                    + [float(v) for v in blow.S_plus[k]] + [float(v) for v in blow.L[k]])
    header = (["r"] + [f"residual{i + 1}" for i in range(m)] + [f"slope{i + 1}" for i in range(m)]
              + [f"S_plus{i + 1}" for i in range(m)] + [f"L{i + 1}" for i in range(m)])
    write_csv(out / "ladder.csv", header, rows)
    write_csv(out / "a_ladder.csv", ["r", "a"], ([float(r), float(v)] for r, v in zip(inc, a)))
    return status


def _cone(cfg: RunConfig) -> ConePair:
    sec = "cones"
    n = cfg.problem.domain.dim
    x0 = cfg.floats(sec, "x0", [0.0] * n)
    vals = {k: float(cfg.get(sec, k, "0")) for k in ("C1", "C2", "a", "b")}
    return ConePair(tuple(x0), vals["C1"], vals["C2"], vals["a"], vals["b"])


def cmd_cones(cfg: RunConfig, out: Path, seed: int) -> int:
    cone = _cone(cfg)
    radii = cfg.floats("cones", "radii", [0.25, 0.5, 0.75, 1.0])
    e = np.zeros(len(cone.x0))
    e[0] = 1.0
    u10, u20 = cone_eval(cone, np.array(cone.x0))
    rows = []
    for r in radii:
        if not r > 0:
            raise ValidationError("cone radii must be > 0")
        p1, p2 = cone_eval(cone, np.array(cone.x0) + r * e)
        fit = fit_cone(u10, u20, p1, p2, r, x0=cone.x0)
        rows.append([float(r), float(p1), float(p2), fit.C1, fit.C2, fit.a, fit.b])
    write_csv(out / "cones.csv", ["r", "psi1", "psi2", "C1_fit", "C2_fit", "a_fit", "b_fit"], rows)
    return EXIT_OK


def cmd_markov(cfg: RunConfig, out: Path, seed: int) -> int:
    gen = cfg.problem.generator
    grid = cfg.floats("markov", "s", [0.0, 0.01, 1.0])
    if any(s < 0 for s in grid):
        raise ValidationError("[markov] s grid must be nonnegative")
    i = _mode(cfg, "markov")
    rows = [[float(s)] + [float(v) for v in gen.transition_matrix(s)[i]] for s in grid]
    write_csv(out / "rho.csv", ["s"] + [f"rho{k + 1}" for k in range(gen.m)], rows)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "analyze": cmd_analyze,
            "cones": cmd_cones, "markov": cmd_markov}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tugsys", description="Coupled infinity-Laplace solver and game simulator.")
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", default=None, help="output directory (default: [output] dir or ./out)")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed (unsigned 64-bit)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(config_path, command: str, out=None, seed=None) -> int:
    """Run one subcommand; returns the process exit code."""
    try:
        cfg = load_config(config_path)
        out = Path(out if out is not None else cfg.get("output", "dir", "out"))
        if seed is None:
            seed = int(cfg.get("game", "seed", "0"))
        if not 0 <= seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[command](cfg, out, seed)
    except ValidationError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_VALIDATION
    except (TugsysError, ArithmeticError, OSError, RuntimeError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    return run(args.config, args.command, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
