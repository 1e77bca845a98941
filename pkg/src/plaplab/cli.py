"""Command-line entry point.

    plaplab solve      --config run.cfg --out out/
    plaplab geometry   --config run.cfg --out out/
    plaplab seminorm   --config run.cfg --out out/ --refine 1
    plaplab experiment caloric_decay --config run.cfg --out out/ --seed 3
    plaplab validate   --module oscillation

Every computing subcommand writes ``report.json`` (deterministic for a given
config and seed), ``data.csv``, ``meta.json`` (timestamp, argv, versions) and
``figure.png``.  Exit status: 0 success, 1 computational failure, 2 config error.
"""

from __future__ import annotations

import argparse
import inspect
import sys
from pathlib import Path

import numpy as np

from . import report
from .config import EXPERIMENT_NAMES, ConfigError, RunConfig, parse_config
from .experiments import EXPERIMENTS
from .experiments.common import face, g_field, log_profile, modulation, power_profile, v_of
from .experiments.decay import trig_seed
from .geometry import StartingCubeError, build_family, check_family, default_ladder
from .grid import DegenerateRegionError, GradientField, Grid, gradient_field, write_field_csv
from .oscillation import Box, blo_seminorm, bmo_par, bochner_bmo
from .solver import SolverError, solve

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# default exponent for the ``power`` data profile when no power weight is configured
POWER_GAMMA = 0.3


# ---------------------------------------------------------------------------
# data for the solve / geometry / seminorm subcommands


def _center(cfg: RunConfig) -> tuple[float, ...]:
    g = cfg.grid
    c = cfg.experiment["center"]
    if c is None:
        return tuple(o + g.L / 2 for o in g.origin)
    return (float(c),) * g.n


def initial_data(cfg: RunConfig) -> np.ndarray:
    g, kind = cfg.grid, cfg.experiment["u0"]
    if kind == "zero":
        u = np.zeros(g.shape)
    elif kind == "sin":
        u = np.ones(g.shape)
        for c in g.coords():
            u = u * np.sin(2 * np.pi * c / g.L)
    else:  # trig: random modes along each axis
        u = np.zeros(g.shape)
        for d, c in enumerate(g.coords()):
            line = trig_seed(Grid(1, 1, g.m, g.L, g.tau, g.T, origin=(g.origin[d],)),
                             cfg.experiment["seed"] + d)
            shape = [1] * g.n
            shape[d] = g.m
            u = u + line.reshape(shape)
    return np.repeat(u.reshape(g.size, 1), g.N, axis=1)


def data_field(cfg: RunConfig) -> GradientField | None:
    """``g = A eta(t) profile(x_1) E`` with ``E`` the first unit matrix."""
    g, ex = cfg.grid, cfg.experiment
    if ex["g"] == "zero":
        return None
    line_grid = Grid(1, g.N, g.m, g.L, g.tau, g.T, g.bc, origin=(g.origin[0],))
    x0 = face(line_grid, g.m // 2)
    if ex["g"] == "log":
        prof = log_profile(line_grid, x0)
    elif ex["g"] == "power":
        gamma = cfg.weight.gamma if cfg.weight.kind == "power" else POWER_GAMMA
        prof = power_profile(line_grid, x0, gamma * (cfg.solver.p - 1))
    else:
        prof = np.cos(2 * np.pi * line_grid.axis(0) / g.L)
    line = g_field(line_grid, prof, ex["amplitude"], lambda t: modulation(t, g.T)).values
    if g.n == 1:
        return GradientField(g, line)
    out = np.zeros((g.steps + 1, *g.shape, g.N, g.n))
    out[..., 0] = line[:, :, None, :, 0]
    return GradientField(g, out)


def _solve(cfg: RunConfig):
    return solve(initial_data(cfg), data_field(cfg), cfg.solver, cfg.grid)


def _refined(cfg: RunConfig, level: int) -> RunConfig:
    if level == 0:
        return cfg
    f = 2**level
    g = cfg.grid
    grid = Grid(g.n, g.N, g.m * f, g.L, g.tau / f, g.T, g.bc, g.origin)
    return RunConfig(grid, cfg.solver, cfg.geometry, cfg.weight, cfg.experiment, cfg.raw, cfg.explicit)


# ---------------------------------------------------------------------------
# subcommands: each returns (report, rows, draw)


def cmd_solve(cfg: RunConfig, args):
    cfg = _refined(cfg, args.refine)
    res = _solve(cfg)
    g = cfg.grid
    rows = [dict(k=k, t=float(t), iterations=(res.iterations[k - 1] if k else 0),
                 residual=(res.residuals[k - 1] if k else 0.0), energy=float(res.energy[k]))
            for k, t in enumerate(g.times())]
    with open(args.out / "field.csv", "w") as fh:
        write_field_csv(res.u, fh)
    rep = dict(command="solve", config=cfg.to_json(), grid=_grid_json(g), steps=rows,
               max_residual=max(res.residuals), total_iterations=int(sum(res.iterations)),
               field_file="field.csv")
    final = res.u.values[-1]

    def draw(ax):
        if g.n == 1:
            for c in range(g.N):
                ax.plot(g.axis(0), final[:, c], label=f"u_{c}")
            ax.set_xlabel("x")
            ax.legend()
        else:
            im = ax.imshow(final[..., 0].T, origin="lower", extent=(0, g.L, 0, g.L))
            ax.figure.colorbar(im, ax=ax)
        ax.set_title(f"u at t = {g.T:g}, p = {cfg.solver.p:g}")

    return rep, rows, draw


def cmd_geometry(cfg: RunConfig, args):
    cfg = _refined(cfg, args.refine)
    res = _solve(cfg)
    G = gradient_field(res.u)
    geo, g = cfg.geometry, cfg.grid
    x = _center(cfg)
    ladder = default_ladder(geo["R"], g.h, geo["min_cells"])
    fam = build_family((g.steps, x), geo["R"], g.T, geo["b"], G, cfg.solver.p, ladder)
    rows = fam.rows(geo["K"])
    checks = check_family(fam, G, K=geo["K"])
    rep = dict(command="geometry", config=cfg.to_json(), grid=_grid_json(g), center=list(x),
               beta=fam.beta, family=rows, checks=checks)

    def draw(ax):
        ax.loglog(fam.radii, fam.s_tilde, "o--", label="s_tilde(r)")
        ax.loglog(fam.radii, fam.s, "s-", label="s(r)")
        ax.loglog(fam.radii, fam.radii**2, ":", label="r^2")
        ax.set_xlabel("r")
        ax.set_ylabel("duration")
        ax.legend()

    return rep, rows, draw


def cmd_seminorm(cfg: RunConfig, args):
    res = _solve(cfg)
    g, p, R = cfg.grid, cfg.solver.p, cfg.geometry["R"]
    x = _center(cfg)
    V = v_of(res.u, p)
    dom = Box.ball_domain(g, x, R)
    k_lo = max(1, g.steps - int(round(R**2 / g.tau)) + 1)
    vals = [bmo_par(V, g, dom, cfg.weight, refine=args.refine),
            bochner_bmo(V, g, dom, cfg.weight, refine=args.refine),
            blo_seminorm(res.u.values, g, dom, cfg.weight, slices=range(k_lo, g.steps + 1),
                         refine=args.refine)]
    rows = []
    for sv in vals:
        w = sv.witness
        rows.append(dict(name=sv.name, value=sv.value, weight=sv.weight,
                         witness_k=None if w is None else max(w.slices),
                         witness_t=None if w is None else w.center[0],
                         witness_x=None if w is None else w.center[1],
                         witness_r=None if w is None else w.radius,
                         regions_tried=sv.regions_tried, scan_density=sv.scan_density))
    rep = dict(command="seminorm", config=cfg.to_json(), grid=_grid_json(g), center=list(x),
               seminorms=[sv.to_json() for sv in vals], rows=rows)

    def draw(ax):
        if g.n == 1:
            ax.plot(g.axis(0), np.linalg.norm(V[-1], axis=-1), label="|V(grad u)| at T")
            for sv in vals:
                if sv.witness is not None:
                    c, r = sv.witness.center[1], sv.witness.radius
                    ax.axvspan(c - r, c + r, alpha=0.15, label=f"{sv.name} witness")
            ax.set_xlabel("x")
            ax.legend()
        else:
            ax.imshow(np.linalg.norm(V[-1], axis=-1).T, origin="lower", extent=(0, g.L, 0, g.L))

    return rep, rows, draw


def experiment_kwargs(cfg: RunConfig, runner, refine: int) -> dict:
    """Map explicitly-set config keys onto the runner's parameters."""
    params = inspect.signature(runner).parameters
    ex, geo, g = cfg.experiment, cfg.geometry, cfg.grid
    kw: dict = dict(p=cfg.solver.p)
    if cfg.given("grid", "m"):
        kw["m"] = g.m
    if cfg.given("grid", "tau") or cfg.given("grid", "T"):
        kw["steps"] = g.steps
        kw["T"] = g.T
    if cfg.given("solver", "epsilon"):
        kw["epsilon"] = cfg.solver.epsilon
    if cfg.given("geometry", "R"):
        kw["R" if "R" in params else "r"] = geo["R"]
    for key in ("b", "K", "exponent"):
        if cfg.given("geometry", key):
            kw[key] = geo[key]
    if cfg.given("weight", "kind") or cfg.given("weight", "gamma"):
        kw["weight"] = cfg.weight
        kw["gamma"] = cfg.weight.gamma
    if ex["sweep"]:
        kw["amplitudes"] = tuple(ex["sweep"])
    if cfg.given("experiment", "alpha_hat"):
        kw["alpha_hat"] = ex["alpha_hat"]
    if cfg.given("experiment", "use_intrinsic_g_norm"):
        kw["use_intrinsic_g_norm"] = ex["use_intrinsic_g_norm"]
    kw["seeds"] = range(ex["seed"], ex["seed"] + ex["seeds"])
    kw["refine"] = ex["refinement"] if refine == 1 else refine > 1
    if refine == 2:
        for key in ("m", "steps"):
            kw[key] = 2 * kw.get(key, params[key].default)
    return {k: v for k, v in kw.items() if k in params}


def cmd_experiment(cfg: RunConfig, args):
    name = cfg.experiment["name"]
    runner = EXPERIMENTS[name]
    kw = experiment_kwargs(cfg, runner, args.refine)
    out = runner(**kw)
    params = {k: (list(v) if isinstance(v, range) else v) for k, v in kw.items()}
    if name == "caloric_decay":
        rows = [r for rep in out for r in rep.csv_rows()]
        rep = dict(command="experiment", experiment=name, params=params,
                   reports=[r.to_json() for r in out],
                   all_ok=all(r.status == "ok" for r in out))

        def draw(ax):
            for r in out:
                if r.status == "ok":
                    ax.loglog(r.thetas, r.phi, "o-", label=f"seed {r.seed}: alpha {r.alpha:.2f}")
            ax.set_xlabel("theta")
            ax.set_ylabel("phi(theta rho)")
            ax.legend(fontsize=7)

        return rep, rows, draw

    rows = out.csv_rows()
    rep = dict(command="experiment", experiment=name, params=params, report=out.to_json())
    return rep, rows, _sweep_figure(name, out)


def _sweep_figure(name, out):
    def draw(ax):
        if name == "comparison":
            for A in out.values:
                sel = [r for r in out.rows if r["A"] == A]
                ax.loglog([r["r"] for r in sel], [max(r["lhs"], 1e-300) for r in sel], "o-",
                          label=f"A = {A:g}")
            ax.set_xlabel("r")
            ax.set_ylabel("comparison LHS")
        elif name == "hoelder_transfer":
            for prof in out.constants.get("profiles", []):
                ys = report.finite(prof["campanato"])
                if len(ys) == len(prof["radii"]) and all(y > 0 for y in ys):
                    ax.loglog(prof["radii"], ys, "o-", label=f"A = {prof['A']:g}")
            ax.set_xlabel("r")
            ax.set_ylabel("Campanato quotient")
        else:
            key = "blo" if name == "main_bmo" else "lhs"
            xs = [r["A"] for r in out.rows if "A" in r and r.get(key, 0) > 0]
            ys = [r[key] for r in out.rows if "A" in r and r.get(key, 0) > 0]
            ax.loglog(xs, ys, "o-", label=key)
            ax.set_xlabel("A")
        ax.set_title(name)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=7)

    return draw


def _grid_json(g: Grid) -> dict:
    return dict(n=g.n, N=g.N, m=g.m, L=g.L, tau=g.tau, T=g.T, bc=g.bc, h=g.h, steps=g.steps)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plaplab", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp):
        sp.add_argument("--config", type=Path, help="run configuration file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="overrides [experiment] seed")
        sp.add_argument("--refine", type=int, choices=(0, 1, 2), default=0,
                        help="refinement level (grid, scan density or refinement check)")
        sp.add_argument("--no-figure", action="store_true", help="skip figure.png")

    common(sub.add_parser("solve", help="run the time-stepping solver"))
    common(sub.add_parser("geometry", help="build the intrinsic cylinder family"))
    common(sub.add_parser("seminorm", help="scan BMO/BLO seminorms of a solution"))
    ex = sub.add_parser("experiment", help="run a named experiment")
    ex.add_argument("name", choices=EXPERIMENT_NAMES)
    common(ex)
    ex.set_defaults(refine=1)
    va = sub.add_parser("validate", help="run the invariant suites")
    va.add_argument("--module", default="all",
                    choices=("all", "grid_fields", "psolver", "intrinsic_geometry", "oscillation",
                             "experiments", "cli_report"))
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--out", type=Path, help="optional directory for report.json")
    return ap


COMMANDS = {"solve": cmd_solve, "geometry": cmd_geometry, "seminorm": cmd_seminorm,
            "experiment": cmd_experiment}


def _run_validate(args, argv) -> int:
    from .validate import run

    checks = run(args.module, args.seed)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.module}.{c.name} {c.value!r} {c.detail}".rstrip())
    ok = all(c.passed for c in checks)
    if args.out is not None:
        report.write_outputs(args.out, dict(module=args.module, seed=args.seed, checks=checks),
                             [c.to_json() for c in checks], argv, args.seed)
    return EXIT_OK if ok else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command == "validate":
        return _run_validate(args, argv)

    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, experiment=getattr(args, "name", None))
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.experiment["seed"] = args.seed
            cfg.raw["experiment"]["seed"] = args.seed
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG

    args.out.mkdir(parents=True, exist_ok=True)
    try:
        rep, rows, draw = COMMANDS[args.command](cfg, args)
    except (SolverError, StartingCubeError, DegenerateRegionError) as exc:
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        # constraints the parser cannot see (e.g. a cylinder reaching past t = 0)
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    paths = report.write_outputs(args.out, rep, rows, argv, cfg.experiment["seed"],
                                 None if args.no_figure else draw)
    for p in paths:
        print(p)
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

