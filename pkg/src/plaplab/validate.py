"""Quick invariant suites, one per module, run by ``plaplab validate``.

Each suite takes a few seconds on a single core and returns a list of
:class:`Check` records.  The full property tests live in the pytest suite.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass

import numpy as np

from .grid import (GradientField, Grid, SpaceTimeField, cylinder, diff_operators, div_flat,
                   grad_flat, gradient_field,
                   read_field_binary, read_field_csv, region_average, write_field_binary,
                   write_field_csv)


@dataclass
class Check:
    module: str
    name: str
    passed: bool
    value: float = float("nan")
    detail: str = ""

    def to_json(self) -> dict:
        return asdict(self)


def _grid(m=32, steps=8, n=1, N=1, bc="periodic", T=0.08) -> Grid:
    return Grid(n=n, N=N, m=m, L=1.0, tau=T / steps, T=T, bc=bc)


def suite_grid_fields(rng) -> list[Check]:
    out = []
    g = _grid(m=16, steps=3, n=2, N=2)
    f = SpaceTimeField(g, rng.normal(size=(4, 16, 16, 2)))
    buf = io.StringIO()
    write_field_csv(f, buf)
    buf.seek(0)
    back = read_field_csv(buf)
    out.append(Check("grid_fields", "csv_round_trip", bool(np.array_equal(back.values, f.values))))
    back = read_field_binary(write_field_binary(f))
    out.append(Check("grid_fields", "binary_round_trip", bool(np.array_equal(back.values, f.values))))

    g1 = _grid(m=64)
    a = SpaceTimeField.from_function(g1, lambda t, x: 3.0 * x - 1.0)
    G = gradient_field(a).values[:, 8:-8]
    err = float(np.max(np.abs(G - 3.0)))
    out.append(Check("grid_fields", "affine_gradient_exact", err < 1e-10, err))

    u = rng.normal(size=(g.size, 2))
    F = rng.normal(size=(g.size, 2, 2))
    lhs = np.sum(div_flat(g, F) * u)
    rhs = -np.sum(F * grad_flat(g, u))
    gap = abs(lhs - rhs) / max(1.0, abs(lhs))
    out.append(Check("grid_fields", "divergence_is_minus_adjoint", bool(gap < 1e-10), float(gap)))

    ones = np.ones((g1.steps + 1, *g1.shape, 1))
    reg = cylinder(g1, g1.steps, (0.5,), 0.2, 0.035)
    avg = float(region_average(ones, g1, reg)[0])
    out.append(Check("grid_fields", "average_of_one", abs(avg - 1) < 1e-12, avg))
    return out


def suite_psolver(rng) -> list[Check]:
    import scipy.sparse as sp

    from .solver import SolverConfig, _flux_jacobian_apply, _StepProblem, solve

    out = []
    g = _grid(m=32, steps=5, T=0.01)
    u0 = np.sin(2 * np.pi * g.axis(0))
    res = solve(u0, None, SolverConfig(p=2.0, epsilon=0.0), g)
    (D,) = diff_operators(g)
    A = sp.identity(g.m) + g.tau * (D.T @ D)
    v = u0.copy()
    for _ in range(g.steps):
        v = sp.linalg.spsolve(A.tocsc(), v)
    err = float(np.max(np.abs(res.u.values[-1, :, 0] - v)))
    out.append(Check("psolver", "p2_matches_linear_backward_euler", err < 1e-8, err))

    cfg = SolverConfig(p=3.0)
    res = solve(u0, None, cfg, g)
    dE = np.diff(res.energy)
    out.append(Check("psolver", "energy_nonincreasing_without_data",
                     bool(np.all(dE <= 1e-12)), float(dE.max())))

    gd = _grid(m=32, steps=4, T=0.01, bc="dirichlet")
    aff = 0.3 * gd.axis(0) + 0.7
    res = solve(aff, None, SolverConfig(p=4.0), gd)
    drift = float(np.max(np.abs(res.u.values[-1, :, 0] - aff)))
    out.append(Check("psolver", "affine_dirichlet_steady", drift < 1e-10, drift))

    g2 = _grid(m=8, steps=1, n=2, N=2, T=0.01)
    prob = _StepProblem(g2, np.zeros((g2.size, 2)), None, SolverConfig(p=3.5, epsilon=1e-3),
                        g2.tau, np.arange(g2.size))
    w = rng.normal(size=(g2.size, 2))
    P = rng.normal(size=(g2.size, 2))
    Q = grad_flat(g2, w)
    Hp = prob.hessian(Q) @ P.ravel()
    ref = P / g2.tau - div_flat(g2, prob.chi[:, None, None]
                                * _flux_jacobian_apply(Q, grad_flat(g2, P), 3.5, 1e-3))
    gap = float(np.max(np.abs(Hp - ref.ravel())) / np.max(np.abs(ref)))
    out.append(Check("psolver", "assembled_hessian_matches_jacobian", gap < 1e-10, gap))
    return out


def suite_intrinsic_geometry(rng) -> list[Check]:
    from .geometry import build_family, check_family, s_tilde

    out = []
    g = _grid(m=64, steps=64, T=1.0)
    G = GradientField(g, np.full((g.steps + 1, g.m, 1, 1), 2.0))
    st = s_tilde(0.25, (g.steps, (0.5,)), 1.0, G, 4.0)
    out.append(Check("intrinsic_geometry", "constant_field_closed_form",
                     abs(st - 1 / 64) < 1e-6 / 64, st))
    vals = np.repeat(rng.uniform(0.2, 3.0, size=(g.steps + 1, 8)), g.m // 8, axis=1)
    G = GradientField(g, vals[..., None, None])
    fam = build_family((g.steps, (0.5,)), 0.25, 0.5, 1.0, G, 3.0)
    chk = check_family(fam, G)
    ok = all(chk[k] for k in ("item1", "item2", "item3", "item7_lower", "item8"))
    out.append(Check("intrinsic_geometry", "random_family_items", ok, len(fam),
                     ",".join(k for k, v in chk.items() if v is False)))
    return out


def suite_oscillation(rng) -> list[Check]:
    from .oscillation import Box, appendix_validators, blo_seminorm, bmo_par

    out = []
    g = _grid(m=64, steps=8)
    x = g.axis(0)
    f = rng.normal(size=(g.steps + 1, g.m, 1))
    dom = Box.whole(g)
    v1 = bmo_par(f, g, dom).value
    v2 = bmo_par(2.5 * f + 4.0, g, dom).value
    out.append(Check("oscillation", "bmo_homogeneous_and_shift_invariant",
                     abs(v2 - 2.5 * v1) < 1e-10 * max(1, v1), v2 / v1 if v1 else float("nan")))
    aff = np.broadcast_to((2 * x - 1)[None, :, None], (g.steps + 1, g.m, 1))
    b = blo_seminorm(aff, g, Box.ball_domain(g, (0.5,), 0.4), slices=[0]).value
    out.append(Check("oscillation", "blo_vanishes_on_affine", bool(b < 1e-10), float(b)))
    rep = appendix_validators(cases=300, seed=int(rng.integers(1 << 31)))
    bad = sum(v["violations"] for v in rep.values())
    out.append(Check("oscillation", "appendix_inequalities", bad == 0, bad))
    return out


def suite_experiments(rng) -> list[Check]:
    from .experiments.common import loglog_fit, refinement_stable
    from .experiments.decay import caloric_decay_case

    out = []
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    fit = loglog_fit(xs, 3.0 * xs**0.5)
    out.append(Check("experiments", "loglog_fit_exact_power", abs(fit.slope - 0.5) < 1e-12, fit.slope))
    out.append(Check("experiments", "refinement_factor_three",
                     refinement_stable(1.0, 2.9) and not refinement_stable(1.0, 3.1)))
    rep = caloric_decay_case(2.0, 0, m=64, steps=25, T=0.1, refine=False)
    ok = rep.status == "ok" and np.isfinite(rep.alpha) and rep.alpha > 0
    out.append(Check("experiments", "decay_case_runs", bool(ok), rep.alpha, rep.status))
    return out


def suite_cli_report(rng) -> list[Check]:
    from .config import ConstraintError, TypeMismatchError, UnknownKeyError, parse_config
    from .report import csv_text, dumps

    out = []
    cfg = parse_config("")
    out.append(Check("cli_report", "defaults_fill", cfg.solver.p == 3.0 and cfg.grid.m == 128))
    kinds = []
    for text, exc in (("[grid]\nzz = 1\n", UnknownKeyError), ("[geometry]\nb = 2.5\n", ConstraintError),
                      ("[grid]\nm = x\n", TypeMismatchError)):
        try:
            parse_config(text)
            kinds.append(False)
        except exc:
            kinds.append(True)
        except Exception:
            kinds.append(False)
    out.append(Check("cli_report", "distinct_config_errors", all(kinds)))
    vals = rng.normal(size=5).tolist()
    rows = [dict(i=i, v=v) for i, v in enumerate(vals)]
    text = dumps(dict(rows=rows))
    ok = text == dumps(dict(rows=rows)) and all(repr(v) in text for v in vals) \
        and all(repr(v) in csv_text(rows) for v in vals)
    out.append(Check("cli_report", "csv_numbers_in_json", ok))
    return out


SUITES = {
    "grid_fields": suite_grid_fields,
    "psolver": suite_psolver,
    "intrinsic_geometry": suite_intrinsic_geometry,
    "oscillation": suite_oscillation,
    "experiments": suite_experiments,
    "cli_report": suite_cli_report,
}


def run(module: str = "all", seed: int = 0) -> list[Check]:
    names = list(SUITES) if module == "all" else [module]
    rng = np.random.default_rng(seed)
    checks = []
    for name in names:
        checks.extend(SUITES[name](rng))
    return checks
