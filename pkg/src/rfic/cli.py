"""Command-line front end.

Every command resolves a flat configuration (built-in defaults, then an
optional JSON file, then flags), validates it, runs, and writes a CSV whose
first line records the configuration hash and seed. Exit codes: 0 success,
2 invalid configuration, 3 a verification failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Callable

import numpy as np

from . import _kernels
from ._parallel import run_tasks
from .chain import MIN_CHAIN_LENGTH, run_replicas
from .coarsegrain import verify_block_bounds
from .continuum import ASYMPTOTIC_SHIFT, SHIFT_PLUS_GAMMA, continuum_free_energy
from .disorder import DisorderLaw, rng_for, w1_clt_curve
from .experiments import leading_coefficient_sweep, sandwich_test_gaussian
from .report import render_csv, render_json, svg_line_chart

COMMANDS = ("fe", "flips", "continuum", "w1", "verify-bounds", "sweep", "sandwich")
STOCHASTIC = frozenset(COMMANDS) - {"continuum"}

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3

DEFAULTS: dict[str, Any] = {
    "law": {"kind": "gaussian", "variance": 1.0, "p": None},
    "J": None,
    "J_grid": None,
    "N": 10**6,
    "replicas": 32,
    "seed": None,
    "boundary": [1, 1],
    "L": None,
    "M": None,
    "L_grid": [4, 16, 64, 256],
    "n": 200_000,
    "trials": 10_000,
    "G": 1000,
    "n_blocks": 20_000,
    "asym": "minus-gamma",
    "workers": None,
    "out": None,
    "json": None,
    "svg": None,
}

# default J grids when neither J nor J_grid is given
_DEFAULT_GRIDS = {"sweep": [2.0, 4.0, 6.0, 8.0], "sandwich": [4.0, 6.0]}


# constant c in F(J) ~ 1 / (2J + c)
_SHIFTS = {"minus-gamma": ASYMPTOTIC_SHIFT, "plus-gamma": SHIFT_PLUS_GAMMA}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


# -- parsing helpers ------------------------------------------------------------

def _count(field: str, value) -> int:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{field}: expected a count, got {value!r}") from None
    if not math.isfinite(x) or x != int(x) or x < 1:
        raise ConfigError(f"{field}: expected a positive integer, got {value!r}")
    return int(x)


def _real(field: str, value) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{field}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{field}: must be finite, got {value!r}")
    return x


def _grid(field: str, value, conv: Callable[[str, Any], Any]) -> list:
    if isinstance(value, str):
        parts = [s.strip() for s in value.split(",")]
        if any(p == "" for p in parts):
            raise ConfigError(f"{field}: malformed grid {value!r}")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"{field}: expected a list, got {value!r}")
    if not parts:
        raise ConfigError(f"{field}: grid is empty")
    return [conv(field, p) for p in parts]


def _law(value) -> DisorderLaw:
    if not isinstance(value, dict):
        raise ConfigError(f"law: expected an object, got {value!r}")
    try:
        return DisorderLaw.from_dict(value)
    except (TypeError, ValueError) as exc:
        field, sep, rest = str(exc).partition(":")
        if sep and field in ("kind", "variance", "p"):
            raise ConfigError(f"law.{field}:{rest}") from None
        raise ConfigError(f"law: {exc}") from None


# -- configuration ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfic", description="Random field Ising chain numerical lab.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with configuration keys; flags override it")
    ap.add_argument("--law", dest="kind", help="gaussian, rademacher, uniform, expdiff or pareto")
    ap.add_argument("--variance", help="variance of the disorder law")
    ap.add_argument("--p", help="moment order (pareto only)")
    ap.add_argument("--J", help="single coupling")
    ap.add_argument("--J-grid", dest="J_grid", help="comma-separated couplings")
    ap.add_argument("--N", help="chain length, e.g. 1e7")
    ap.add_argument("--replicas")
    ap.add_argument("--seed")
    ap.add_argument("--boundary", help="boundary spins a,b, e.g. 1,-1")
    ap.add_argument("--L", help="block length")
    ap.add_argument("--M", help="threshold")
    ap.add_argument("--L-grid", dest="L_grid", help="comma-separated block lengths (w1)")
    ap.add_argument("--n", help="Monte Carlo sample size (w1)")
    ap.add_argument("--trials", help="random blocks (verify-bounds)")
    ap.add_argument("--G", help="Brownian grid size (sandwich)")
    ap.add_argument("--n-blocks", dest="n_blocks", help="Brownian blocks (sandwich)")
    ap.add_argument("--asym", choices=sorted(_SHIFTS), help="constant in the large-J form (continuum)")
    ap.add_argument("--workers", help="worker threads (default RFIC_THREADS or all cores)")
    ap.add_argument("--out", help="CSV path (default stdout)")
    ap.add_argument("--json", help="JSON artifact path")
    ap.add_argument("--svg", help="SVG chart path")
    return ap


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be an object")
        for k, v in doc.items():
            if k == "command":
                continue
            if k not in cfg:
                raise ConfigError(f"{k}: unknown configuration key")
            if k == "law" and isinstance(v, dict):
                cfg["law"] = {"kind": None, "variance": 1.0, "p": None, **v}
            else:
                cfg[k] = v
    flags = vars(args)
    for k in ("kind", "variance", "p"):
        if flags[k] is not None:
            cfg["law"][k] = flags[k]
    for k in DEFAULTS:
        if k != "law" and flags.get(k) is not None:
            cfg[k] = flags[k]
    # a coupling flag replaces whichever coupling form the file used
    if flags.get("J") is not None:
        cfg["J_grid"] = None
    if flags.get("J_grid") is not None:
        cfg["J"] = None
    return validate(args.command, cfg)


def validate(command: str, cfg: dict[str, Any]) -> dict[str, Any]:
    out = dict(cfg)
    law = _law(cfg["law"])
    out["law"] = law.to_dict()
    if cfg["J"] is not None and cfg["J_grid"] is not None:
        raise ConfigError("J: give either J or J_grid, not both")
    if cfg["J"] is not None:
        grid = [_real("J", cfg["J"])]
    elif cfg["J_grid"] is not None:
        grid = _grid("J_grid", cfg["J_grid"], _real)
    elif command in _DEFAULT_GRIDS:
        grid = list(_DEFAULT_GRIDS[command])
    elif command in ("w1",):
        grid = []
    else:
        raise ConfigError("J: required for this command")
    if any(J < 0 for J in grid):
        raise ConfigError("J: couplings must be >= 0")
    out["J"], out["J_grid"] = None, grid
    out["N"] = _count("N", cfg["N"])
    out["replicas"] = _count("replicas", cfg["replicas"])
    if command in STOCHASTIC:
        if cfg["seed"] is None:
            raise ConfigError(f"seed: required for command {command}")
        try:
            out["seed"] = int(cfg["seed"])
        except (TypeError, ValueError):
            raise ConfigError(f"seed: expected an integer, got {cfg['seed']!r}") from None
        if out["seed"] < 0:
            raise ConfigError("seed: must be >= 0")
    else:
        out["seed"] = None
    bd = _grid("boundary", cfg["boundary"], lambda f, v: int(_real(f, v)))
    if len(bd) != 2 or any(s not in (1, -1) for s in bd):
        raise ConfigError(f"boundary: expected two spins in {{1,-1}}, got {cfg['boundary']!r}")
    out["boundary"] = bd
    out["L"] = None if cfg["L"] is None else _count("L", cfg["L"])
    if cfg["M"] is not None:
        out["M"] = _real("M", cfg["M"])
        if out["M"] < 0:
            raise ConfigError("M: must be >= 0")
    out["L_grid"] = _grid("L_grid", cfg["L_grid"], _count)
    for k in ("n", "trials", "G", "n_blocks"):
        out[k] = _count(k, cfg[k])
    if cfg["asym"] not in _SHIFTS:
        raise ConfigError(f"asym: expected one of {sorted(_SHIFTS)}, got {cfg['asym']!r}")
    out["workers"] = None if cfg["workers"] is None else _count("workers", cfg["workers"])

    if command in ("fe", "flips", "sweep") and out["N"] < MIN_CHAIN_LENGTH:
        raise ConfigError(f"N: chain length must be >= {MIN_CHAIN_LENGTH}")
    if command == "sweep" and (len(grid) < 3 or any(b <= a for a, b in zip(grid, grid[1:]))):
        raise ConfigError("J_grid: sweep needs a strictly increasing grid of at least 3 points")
    if command == "sandwich":
        if law.kind != "gaussian" or law.variance != 1.0:
            raise ConfigError("law: sandwich is defined for the standard Gaussian law")
        if out["M"] is None and any(J <= 1 for J in grid):
            raise ConfigError("J_grid: default M needs J > 1")
    if command == "verify-bounds":
        if out["L"] is None:
            raise ConfigError("L: required for verify-bounds")
        if out["M"] is None:
            raise ConfigError("M: required for verify-bounds")
    if command == "w1" and law.degenerate:
        raise ConfigError("law.variance: w1 needs a non-degenerate law")
    return out


# -- commands ---------------------------------------------------------------------

class Result:
    def __init__(self, columns, rows, payload, exit_code=EXIT_OK, message=None, chart=None):
        self.columns = columns
        self.rows = rows
        self.payload = payload
        self.exit_code = exit_code
        self.message = message
        self.chart = chart  # (x, {name: y}, title, xlabel)


def _law_of(cfg) -> DisorderLaw:
    return DisorderLaw.from_dict(cfg["law"])


def cmd_fe(cfg) -> Result:
    tab = run_replicas(_law_of(cfg), cfg["J_grid"], cfg["N"], cfg["replicas"], cfg["seed"],
                       tuple(cfg["boundary"]), 0, cfg["workers"])
    est = tab.free_energy_estimates()
    rows = [(e.J, e.value, e.stderr, e.chain_length, e.replicas) for e in est]
    payload = {"J": [e.J for e in est], "F_hat": [e.value for e in est],
               "stderr": [e.stderr for e in est], "per_replica": tab.free_energy.tolist()}
    return Result(["J", "F_hat", "stderr", "chain_length", "replicas"], rows, payload)


def cmd_flips(cfg) -> Result:
    tab = run_replicas(_law_of(cfg), cfg["J_grid"], cfg["N"], cfg["replicas"], cfg["seed"],
                       tuple(cfg["boundary"]), 2, cfg["workers"])
    dens = tab.flip_density_estimates()
    var = tab.flip_variance.mean(axis=0)
    rows = [(e.J, e.value, e.stderr, float(v), 4 * e.J**2 * e.value) for e, v in zip(dens, var)]
    payload = {"rows": [dict(zip(["J", "density", "stderr", "variance_density", "flip_coeff"], r))
                        for r in rows]}
    return Result(["J", "density", "stderr", "variance_density", "flip_coeff"], rows, payload)


def cmd_continuum(cfg) -> Result:
    evs = [continuum_free_energy(J, _SHIFTS[cfg["asym"]]) for J in cfg["J_grid"]]
    rows = [(e.J, e.x, e.F_exact, e.F_asym, e.gap) for e in evs]
    payload = {"rows": [dict(zip(["J", "x", "F_exact", "F_asym", "gap"], r)) for r in rows]}
    chart = ([e.J for e in evs], {"F_exact": [e.F_exact for e in evs],
                                  "F_asym": [e.F_asym for e in evs]}, "continuum free energy", "J")
    return Result(["J", "x", "F_exact", "F_asym", "gap"], rows, payload, chart=chart)


def cmd_w1(cfg) -> Result:
    law = _law_of(cfg)
    pts = w1_clt_curve(law, cfg["L_grid"], cfg["n"], cfg["seed"], replicates=cfg["replicas"])
    rows = [(p.L, p.w1, p.stderr) for p in pts]
    payload = {"law": law.to_dict(), "rows": [p._asdict() for p in pts]}
    chart = ([p.L for p in pts], {"W1": [p.w1 for p in pts]}, "W1 to the Gaussian", "L")
    return Result(["L", "w1", "stderr"], rows, payload, chart=chart)


_VB_CHUNK = 500


def _vb_task(task):
    law, L, Js, M, seed, stream, count = task
    rng = rng_for(seed, stream)
    passed = 0
    worst = {"lower": math.inf, "upper": math.inf, "revisited": math.inf}
    fails = {"lower": 0, "upper": 0, "revisited": 0}
    for _ in range(count):
        h = law.draw(rng, L)
        ok = True
        for J in Js:
            lz = _kernels.log_transfer(np.ascontiguousarray(h), J)
            for a in (1, -1):
                for b in (1, -1):
                    ia, ib = (0 if a == 1 else 1), (0 if b == 1 else 1)
                    for r in verify_block_bounds(h, J, M, a, b, log_z=float(lz[ia, ib])):
                        worst[r.inequality_id] = min(worst[r.inequality_id], r.slack)
                        if not r.passed:
                            fails[r.inequality_id] += 1
                            ok = False
        passed += ok
    return passed, worst, fails


def cmd_verify_bounds(cfg) -> Result:
    law = _law_of(cfg)
    T = cfg["trials"]
    counts = [min(_VB_CHUNK, T - k) for k in range(0, T, _VB_CHUNK)]
    tasks = [(law, cfg["L"], cfg["J_grid"], cfg["M"], cfg["seed"], s, c) for s, c in enumerate(counts)]
    res = run_tasks(_vb_task, tasks, cfg["workers"])
    passed = sum(r[0] for r in res)
    rows = []
    for key in ("lower", "upper", "revisited"):
        checks = T * len(cfg["J_grid"]) * 4
        fails = sum(r[2][key] for r in res)
        rows.append((key, checks, checks - fails, min(r[1][key] for r in res)))
    msg = f"{passed}/{T} pass"
    payload = {"trials": T, "passed": passed,
               "inequalities": [dict(zip(["inequality", "checks", "passed", "min_slack"], r)) for r in rows]}
    return Result(["inequality", "checks", "passed", "min_slack"], rows, payload,
                  EXIT_OK if passed == T else EXIT_FAILED, msg)


def cmd_sweep(cfg) -> Result:
    sw = leading_coefficient_sweep(_law_of(cfg), cfg["J_grid"], cfg["N"], cfg["replicas"], cfg["seed"],
                                   tuple(cfg["boundary"]), cfg["workers"])
    cols = ["J", "F_hat", "stderr", "coeff", "flip_coeff"]
    rows = [tuple(r[c] for c in cols) for r in sw.rows()]
    chart = (list(sw.J_grid), {"2J F_hat": list(sw.coeff), "4J^2 density": list(sw.flip_coeff),
                               "variance": [sw.law.variance] * len(sw.J_grid)},
             "leading coefficient", "J")
    return Result(cols, rows, sw.to_dict(), chart=chart)


def cmd_sandwich(cfg) -> Result:
    res = sandwich_test_gaussian(cfg["J_grid"], cfg["N"], cfg["replicas"], cfg["seed"], cfg["M"],
                                 cfg["G"], cfg["n_blocks"], workers=cfg["workers"])
    cols = ["J", "M", "lower", "F_hat", "stderr", "upper", "pass"]
    rows = [(r.J, r.M, r.lower, r.F_hat, r.F_se, r.upper, r.passed) for r in res]
    ok = all(r.passed for r in res)
    payload = {"rows": [dict(zip(cols, row)) for row in rows],
               "lower_se": [r.lower_se for r in res], "upper_se": [r.upper_se for r in res]}
    msg = f"{sum(r.passed for r in res)}/{len(res)} pass"
    return Result(cols, rows, payload, EXIT_OK if ok else EXIT_FAILED, msg)


HANDLERS = {
    "fe": cmd_fe,
    "flips": cmd_flips,
    "continuum": cmd_continuum,
    "w1": cmd_w1,
    "verify-bounds": cmd_verify_bounds,
    "sweep": cmd_sweep,
    "sandwich": cmd_sandwich,
}


def run(command: str, cfg: dict[str, Any], stdout=None) -> int:
    """Execute a validated configuration and write its artifacts."""
    stdout = sys.stdout if stdout is None else stdout
    res = HANDLERS[command](cfg)
    text = render_csv(command, cfg, res.columns, res.rows)
    if cfg.get("out"):
        with open(cfg["out"], "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if cfg.get("json"):
        with open(cfg["json"], "w") as fh:
            fh.write(render_json(command, cfg, res.payload))
    if cfg.get("svg"):
        if res.chart is None:
            raise ConfigError(f"svg: no chart for command {command}")
        x, series, title, xlabel = res.chart
        with open(cfg["svg"], "w") as fh:
            fh.write(svg_line_chart(x, series, title, xlabel, comment=f"rfic {command} seed={cfg['seed']}"))
    if res.message:
        print(res.message, file=sys.stderr if not cfg.get("out") else stdout)
    return res.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"rfic: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
