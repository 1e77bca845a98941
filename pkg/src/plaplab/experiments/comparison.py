"""Distance between a solution ``u`` and its p-caloric comparison ``h`` on ladder cylinders."""

from __future__ import annotations

import numpy as np

from ..geometry import build_family, default_ladder
from ..grid import Grid, SpaceTimeField, cylinder, gradient_field
from ..oscillation import Box, bochner_bmo, v_map
from ..solver import SolverConfig, solve, solve_caloric
from .common import SweepReport, face, g_field, log_profile, loglog_fit, refinement_stable
from .decay import trig_seed


def comparison_terms(u: SpaceTimeField, k_top: int, x: float, r: float, s: float, lam: float,
                     cfg: SolverConfig) -> dict:
    """Both terms of the comparison estimate on ``Q = (t - s, t] x B_r(x)``.

    The ``|u - h|^2`` term is evaluated on the top slice, the gradient term
    over the whole cylinder.  ``s`` is snapped to whole steps as in
    :func:`~plaplab.solver.solve_caloric`.
    """
    grid = u.grid
    p = cfg.p
    sol = solve_caloric(u, k_top, (x,), r, s, cfg)
    nsteps = sol.k_top - sol.k0
    s_eff = nsteps * grid.tau
    region = cylinder(grid, k_top, (x,), r, s_eff)
    cells = region.cells
    hk = sol.slice(k_top).reshape(grid.size, grid.N)
    uk = u.flat(k_top)
    l2 = float(np.mean(np.sum((uk[cells] - hk[cells]) ** 2, axis=-1)))
    term1 = lam ** (p - 2) * l2 / r**2
    hfield = SpaceTimeField(grid.with_steps(grid.tau, nsteps), sol.h)
    Vh = v_map(gradient_field(hfield).values, p)
    Vu = v_map(gradient_field(u).values[sol.k0:k_top + 1], p)
    diff = np.sum((Vu - Vh) ** 2, axis=(-2, -1)).reshape(nsteps + 1, grid.size)
    # slices k0+1..k_top carry the cylinder, each with weight tau
    term2 = float(np.mean(diff[1:, cells]))
    return dict(r=r, s=s_eff, lam=lam, term_l2=term1, term_v=term2, lhs=term1 + term2,
                newton_max=max(sol.residuals) if sol.residuals else 0.0)


def _cylinders(u: SpaceTimeField, p: float, x: float, R: float, b: float, min_cells: float):
    grid = u.grid
    radii = default_ladder(R, grid.h, min_cells)
    if p == 2:
        return [(float(r), float(r) ** 2, 1.0) for r in radii]
    fam = build_family((grid.steps, (x,)), R, grid.T, b, gradient_field(u), p, ladder=radii)
    return [(float(fam.radii[j]), float(fam.s[j]), float(fam.lam[j])) for j in range(len(fam))]


def g_bmo_norm(g_values: np.ndarray, grid: Grid, x: float, r: float, k_lo: int, k_hi: int) -> float:
    """``||g||_{L^inf(I, BMO(B_r(x)))}`` over slices ``k_lo..k_hi``."""
    vals = g_values.reshape(g_values.shape[0], *grid.shape, -1)
    dom = Box.ball_domain(grid, (x,), r, k_lo, k_hi)
    radii = default_ladder(r, grid.h, 1.0)
    return bochner_bmo(vals, grid, dom, radii=radii).value


def comparison_case(p: float, A: float, m: int = 128, steps: int = 200, T: float = 0.5,
                    R: float = 0.25, b: float = 1.0, epsilon: float = 1e-8,
                    zero_data: bool = False, seed: int = 0, min_cells: float = 4.0) -> dict:
    """One amplitude: solve, then compare ``u`` with ``h`` on every ladder cylinder."""
    grid = Grid(n=1, N=1, m=m, L=1.0, tau=T / steps, T=T, bc="periodic")
    cfg = SolverConfig(p=p, epsilon=epsilon)
    x0 = face(grid, m // 2)
    xc = x0 + 0.5 * grid.h
    if zero_data:
        g = None
        u0 = A * trig_seed(grid, seed)
    else:
        g = g_field(grid, log_profile(grid, x0), A)
        u0 = np.zeros(grid.m)
    u = solve(u0[:, None], g, cfg, grid=grid).u
    rows = []
    for r, s, lam in _cylinders(u, p, xc, R, b, min_cells):
        terms = comparison_terms(u, grid.steps, xc, r, s, lam, cfg)
        if g is None:
            terms["rhs"] = 0.0
        else:
            k_lo = max(1, grid.steps - int(round(terms["s"] / grid.tau)) + 1)
            terms["rhs"] = g_bmo_norm(g.values, grid, xc, r, k_lo, grid.steps) ** cfg.p_dual
        terms["ratio"] = terms["lhs"] / terms["rhs"] if terms["rhs"] > 0 else float("nan")
        rows.append(terms)
    return dict(p=p, A=A, m=m, rows=rows, lhs=max(rw["lhs"] for rw in rows),
                c_hat=max((rw["ratio"] for rw in rows if np.isfinite(rw["ratio"])), default=float("nan")))


def run_comparison(p: float, amplitudes=(1.0, 2.0, 4.0, 8.0), m: int = 128, steps: int = 200,
                   T: float = 0.5, R: float = 0.25, b: float = 1.0, epsilon: float = 1e-8,
                   refine: bool = True, scaling_band: float = 3.0) -> SweepReport:
    """Sweep the data amplitude; LHS / A^{p'} should stay within ``scaling_band``."""
    pd = p / (p - 1)
    rows, scaled, chats = [], [], []
    for A in amplitudes:
        case = comparison_case(p, A, m, steps, T, R, b, epsilon)
        for rw in case["rows"]:
            rows.append(dict(p=p, A=A, m=m, **rw))
        scaled.append(case["lhs"] / A**pd)
        chats.append(case["c_hat"])
    zero = comparison_case(p, 1.0, m, steps, T, R, b, epsilon, zero_data=True)
    rep = SweepReport("comparison", "A", [float(a) for a in amplitudes], rows,
                      params=dict(p=p, m=m, steps=steps, T=T, R=R, b=b, epsilon=epsilon))
    rep.constants["lhs_over_A_pdual"] = scaled
    rep.constants["c_hat"] = chats
    rep.constants["c_hat_max"] = float(max(chats))
    rep.constants["zero_data_lhs"] = zero["lhs"]
    band = max(scaled) / min(scaled)
    rep.constants["scaling_band"] = band
    rep.fits["lhs_vs_A"] = loglog_fit(amplitudes, [s * a**pd for s, a in zip(scaled, amplitudes)]).to_json()
    rep.checks["lhs_scales_as_A_pdual"] = bool(band <= scaling_band)
    rep.checks["zero_data_lhs_small"] = bool(zero["lhs"] <= SolverConfig(p=p).newton_tol)
    if refine:
        fine = comparison_case(p, float(amplitudes[0]), 2 * m, 2 * steps, T, R, b, epsilon)
        rep.constants["c_hat_refined"] = fine["c_hat"]
        stable = refinement_stable(chats[0], fine["c_hat"])
        rep.checks["c_hat_refinement_stable"] = stable
        if not stable:
            rep.flags.append("not converged")
    return rep
