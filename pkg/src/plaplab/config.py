"""Sectioned ``key = value`` run configuration.

Sections and keys (defaults in brackets)::

    [grid]        n [1]  N [1]  m [128]  L [1.0]  tau [0.0025]  T [0.5]  bc [periodic]
    [solver]      p [3.0]  epsilon [1e-8]  newton_tol [1e-9]  newton_max_iter [60]
                  armijo_c [1e-4]  min_step [1e-12]  cg_rtol [1e-11]  cg_max_iter [5000]
    [geometry]    b [1.0]  K [1.1]  R [0.25]  min_cells [4.0]  exponent [half]
    [weight]      kind [one]  gamma [0.0]  c1 [1.0]
    [experiment]  name []  sweep []  seeds [5]  seed [0]  refinement [yes]
                  alpha_hat []  use_intrinsic_g_norm [no]  u0 [zero]  g [log]
                  amplitude [1.0]  center []

``sweep`` is a comma-separated list of amplitudes.  ``name`` accepts the runner
name with or without its ``run_`` prefix.  Parsing is stdlib :mod:`configparser`; line numbers for
error messages come from a scan of the raw text.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .grid import Grid
from .oscillation import Weight
from .solver import SolverConfig


class ConfigError(ValueError):
    """Base class; ``line`` is the 1-based line of the offending entry (or None)."""

    kind = "config error"

    def __init__(self, message: str, line: int | None = None):
        self.message = message
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{self.kind}: {where}{message}")


class UnknownKeyError(ConfigError):
    kind = "unknown key"


class ConstraintError(ConfigError):
    kind = "constraint violation"


class TypeMismatchError(ConfigError):
    kind = "type mismatch"


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(text)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _opt_float(text: str) -> float | None:
    return None if not text.strip() else float(text)


SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "grid": {
        "n": (int, 1), "N": (int, 1), "m": (int, 128), "L": (float, 1.0),
        "tau": (float, 0.0025), "T": (float, 0.5), "bc": (str, "periodic"),
    },
    "solver": {
        "p": (float, 3.0), "epsilon": (float, 1e-8), "newton_tol": (float, 1e-9),
        "newton_max_iter": (int, 60), "armijo_c": (float, 1e-4), "min_step": (float, 1e-12),
        "cg_rtol": (float, 1e-11), "cg_max_iter": (int, 5000),
    },
    "geometry": {
        "b": (float, 1.0), "K": (float, 1.1), "R": (float, 0.25), "min_cells": (float, 4.0),
        "exponent": (str, "half"),
    },
    "weight": {"kind": (str, "one"), "gamma": (float, 0.0), "c1": (float, 1.0)},
    "experiment": {
        "name": (str, ""), "sweep": (_floats, []), "seeds": (int, 5), "seed": (int, 0),
        "refinement": (_bool, True), "alpha_hat": (_opt_float, None),
        "use_intrinsic_g_norm": (_bool, False), "u0": (str, "zero"), "g": (str, "log"),
        "amplitude": (float, 1.0), "center": (_opt_float, None),
    },
}

EXPERIMENT_NAMES = ("caloric_decay", "comparison", "main_bmo", "intrinsic_bmo", "hoelder_transfer")


@dataclass
class RunConfig:
    grid: Grid
    solver: SolverConfig
    geometry: dict
    weight: Weight
    experiment: dict
    raw: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def given(self, section: str, key: str) -> bool:
        """True when ``section.key`` was set in the text rather than defaulted."""
        return (section, key) in self.explicit

    def to_json(self) -> dict:
        return self.raw


def _line_map(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        head = re.match(r"^\[(.+)\]$", s)
        if head:
            section = head.group(1).strip()
            lines[(section, "")] = no
            continue
        if section is not None:
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines.setdefault((section, key), no)
    return lines


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate; raises the first :class:`ConfigError` found.

    ``experiment`` names the experiment chosen on the command line; it must agree
    with ``[experiment] name`` when both are given.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (N vs n)
    lines = _line_map(text)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise TypeMismatchError(f"malformed config: {exc}",
                                getattr(exc, "lineno", None)) from exc

    values: dict[str, dict[str, Any]] = {sec: {k: d for k, (_, d) in keys.items()}
                                         for sec, keys in SCHEMA.items()}
    explicit = set()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise UnknownKeyError(f"unknown section [{sec}]", lines.get((sec, "")))
        for key, text_value in cp.items(sec):
            line = lines.get((sec, key))
            if key not in SCHEMA[sec]:
                raise UnknownKeyError(f"unknown key '{key}' in [{sec}]", line)
            conv = SCHEMA[sec][key][0]
            try:
                values[sec][key] = conv(text_value)
                explicit.add((sec, key))
            except ValueError as exc:
                raise TypeMismatchError(f"{sec}.{key}: cannot read {text_value!r} "
                                        f"as {getattr(conv, '__name__', 'value').lstrip('_')}",
                                        line) from exc

    def fail(sec, key, msg):
        raise ConstraintError(msg, lines.get((sec, key)))

    g, s, geo, w, ex = (values[k] for k in ("grid", "solver", "geometry", "weight", "experiment"))
    if ex["name"].startswith("run_"):
        ex["name"] = ex["name"][4:]
    if experiment is not None:
        experiment = experiment.removeprefix("run_")
        if ex["name"] and ex["name"] != experiment:
            fail("experiment", "name", f"config names '{ex['name']}' but '{experiment}' was requested")
        ex["name"] = experiment
    name = ex["name"]
    if name and name not in EXPERIMENT_NAMES:
        fail("experiment", "name", f"unknown experiment '{name}' "
             f"(choose from {', '.join(EXPERIMENT_NAMES)})")
    # cross-module constraints: most specific first
    if name == "intrinsic_bmo" and not s["p"] > 2:
        fail("solver", "p", "p must exceed 2 for intrinsic experiments")
    if name in ("comparison", "main_bmo", "hoelder_transfer") and s["p"] < 2:
        fail("solver", "p", "p must be at least 2 for this experiment")
    if not 0 < geo["b"] < 2:
        fail("geometry", "b", "b must lie in (0,2)")
    if not geo["K"] > 1:
        fail("geometry", "K", "K must exceed 1")
    if not geo["R"] > 0:
        fail("geometry", "R", "R must be positive")
    if geo["exponent"] not in ("half", "p"):
        fail("geometry", "exponent", "exponent must be 'half' or 'p'")
    if g["n"] not in (1, 2):
        fail("grid", "n", "n must be 1 or 2")
    if name and g["n"] != 1:
        fail("grid", "n", "experiments run with n = 1")
    if g["bc"] not in ("periodic", "dirichlet"):
        fail("grid", "bc", "bc must be 'periodic' or 'dirichlet'")
    if g["N"] < 1:
        fail("grid", "N", "N must be at least 1")
    if g["m"] < 8:
        fail("grid", "m", "m must be at least 8")
    if not g["tau"] > 0:
        fail("grid", "tau", "tau must be positive")
    ratio = g["T"] / g["tau"]
    if not g["T"] > 0 or abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        fail("grid", "T", "T/tau must be a positive integer")
    if not s["p"] > 2 * g["n"] / (g["n"] + 2):
        fail("solver", "p", f"p must exceed 2n/(n+2) = {2 * g['n'] / (g['n'] + 2):g}")
    if s["epsilon"] < 0:
        fail("solver", "epsilon", "epsilon must be >= 0")
    if not s["newton_tol"] > 0:
        fail("solver", "newton_tol", "newton_tol must be positive")
    if s["newton_max_iter"] < 1:
        fail("solver", "newton_max_iter", "newton_max_iter must be at least 1")
    if w["kind"] not in ("one", "power"):
        fail("weight", "kind", "weight kind must be 'one' or 'power' in config files")
    if w["kind"] == "power" and not w["gamma"] > 0:
        fail("weight", "gamma", "gamma must be positive for a power weight")
    if ex["seeds"] < 1:
        fail("experiment", "seeds", "seeds must be at least 1")
    if ex["sweep"] and any(a <= 0 for a in ex["sweep"]):
        fail("experiment", "sweep", "sweep values must be positive")
    if ex["sweep"] and name != "caloric_decay" and len(ex["sweep"]) < 4:
        fail("experiment", "sweep", "a sweep needs at least 4 points")
    if ex["u0"] not in ("zero", "sin", "trig"):
        fail("experiment", "u0", "u0 must be zero, sin or trig")
    if ex["g"] not in ("zero", "log", "power", "smooth"):
        fail("experiment", "g", "g must be zero, log, power or smooth")

    grid = Grid(n=g["n"], N=g["N"], m=g["m"], L=g["L"], tau=g["tau"], T=g["T"], bc=g["bc"])
    solver = SolverConfig(**s)
    weight = Weight(w["kind"], w["gamma"], w["c1"])
    return RunConfig(grid, solver, geo, weight, ex, raw=values, explicit=frozenset(explicit))
