"""Oscillation decay of ``V(grad h)`` for p-caloric ``h`` on shrinking intrinsic cylinders."""

from __future__ import annotations

import numpy as np

from ..geometry import ScaledCylinder, build_family
from ..grid import Grid, gradient_field, region_average
from ..oscillation import mean_osc, osc
from ..solver import SolverConfig, solve
from .common import DecayReport, loglog_fit, refinement_stable, v_of

THETAS = (2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5)


def trig_seed(grid: Grid, seed: int, modes: int = 3) -> np.ndarray:
    """Random trigonometric initial data ``sum_j a_j / j sin(2 pi j x / L + phi_j)``."""
    rng = np.random.default_rng(seed)
    x = grid.axis(0)
    u = np.zeros(grid.m)
    for j in range(1, modes + 1):
        a, phi = rng.normal(), rng.uniform(0, 2 * np.pi)
        u += a / j * np.sin(2 * np.pi * j * x / grid.L + phi)
    return u


def _caloric_run(grid: Grid, u0: np.ndarray, p: float, epsilon: float):
    res = solve(u0[:, None], None, SolverConfig(p=p, epsilon=epsilon), grid=grid)
    return res.u


def _base_cylinder(u, p: float, x: float, R: float, K: float) -> ScaledCylinder | None:
    """Largest K-intrinsic cylinder of the family at ``(t_top, x)``; ``Q_{R^2,R}`` for p=2."""
    grid = u.grid
    if p == 2:
        return ScaledCylinder(grid.steps, (x,), R, R**2, 1.0, p)
    G = gradient_field(u)
    fam = build_family((grid.steps, (x,)), R, grid.T, 1.0, G, p)
    for j, status in enumerate(fam.statuses(K)):
        if status == "intrinsic":
            return fam.cylinder(j)
    return None


def _harnack(u, Q: ScaledCylinder, p: float) -> tuple[float, float]:
    """``sup_{Q/2} |grad h| / lambda``; for p=2 lambda is the gradient p-mean over ``Q``."""
    grid = u.grid
    G = gradient_field(u)
    nrm = G.norm()[..., None]
    half = Q.scaled(0.5).region(grid)
    vals = nrm.reshape(nrm.shape[0], grid.size)[half.slices][:, half.cells]
    lam = Q.lam
    if p == 2:
        full = Q.region(grid)
        lam = float(region_average(nrm**p, grid, full).ravel()[0]) ** (1 / p)
    return float(vals.max() / lam), float(lam)


def caloric_decay_case(p: float, seed: int, m: int = 256, steps: int = 100, T: float = 0.1,
                       R: float = 0.25, K: float = 1.1, epsilon: float = 1e-8,
                       thetas=THETAS, refine: bool = True, affine: bool = False) -> DecayReport:
    grid = Grid(n=1, N=1, m=m, L=1.0, tau=T / steps, T=T, bc="periodic")
    rng = np.random.default_rng(seed + 7919)
    x = float(grid.axis(0)[rng.integers(grid.m)])
    if affine:
        u0 = np.full(grid.m, float(rng.normal()))
    else:
        u0 = trig_seed(grid, seed)
    u = _caloric_run(grid, u0, p, epsilon)
    Q = _base_cylinder(u, p, x, R, K)
    if Q is None:
        return DecayReport(p, seed, "skipped: no intrinsic cylinder on the ladder")
    V = v_of(u, p)
    rep = DecayReport(p, seed, "ok", lam=Q.lam, rho=Q.r, s=Q.s, thetas=list(thetas))
    base = Q.region(grid)
    rep.phi_rho = mean_osc(V, grid, base, 2.0)
    for th in thetas:
        reg = Q.scaled(th).region(grid)
        rep.osc.append(osc(V, grid, reg))
        rep.phi.append(mean_osc(V, grid, reg, 2.0))
    if max(rep.osc) <= 1e-12 * max(1.0, float(np.max(np.abs(V)))):
        rep.exact_zero = True
        rep.status = "exact zero"
        rep.harnack = 0.0
        return rep
    fit = loglog_fit(rep.thetas, np.square(rep.osc))
    rep.alpha, rep.r2 = fit.slope, fit.r2
    if fit.flagged:
        rep.flags.append("low R2")
    rep.harnack, lam = _harnack(u, Q, p)
    if p == 2:
        rep.lam = lam
    if refine:
        fine = Grid(n=1, N=1, m=2 * m, L=1.0, tau=T / (2 * steps), T=T, bc="periodic")
        uf = _caloric_run(fine, trig_seed(fine, seed), p, epsilon)
        Qf = _base_cylinder(uf, p, x, R, K)
        if Qf is None:
            rep.flags.append("refined run: no intrinsic cylinder")
        else:
            rep.harnack_refined, _ = _harnack(uf, Qf, p)
            if not refinement_stable(rep.harnack, rep.harnack_refined):
                rep.flags.append("not converged")
    return rep


def run_caloric_decay(p: float, seeds=range(5), m: int = 256, steps: int = 100, T: float = 0.1,
                      R: float = 0.25, K: float = 1.1, epsilon: float = 1e-8,
                      refine: bool = True) -> list[DecayReport]:
    """One :class:`DecayReport` per seed (skipped seeds carry the reason in ``status``)."""
    return [caloric_decay_case(p, int(s), m, steps, T, R, K, epsilon, refine=refine)
            for s in seeds]
