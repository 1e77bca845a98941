"""Backward-Euler variational time stepping for the parabolic p-Laplace system.

Each step minimizes the strictly convex energy

    J(v) = sum_cells h^n [ |v - u_prev|^2 / (2 tau) + Phi_eps(Dv) - g : Dv ]

with ``Phi_eps(Q) = ((|Q|^2 + eps^2)^(p/2) - eps^p) / p``, whose gradient is the
regularized flux.  The minimizer is found by damped Newton (Armijo backtracking
on ``J``) with a Jacobi-preconditioned conjugate gradient inner solve.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .grid import (
    GradientField,
    Grid,
    SpaceTimeField,
    ball_cells,
    _diff_ops,
    diff_operators,
    div_flat,
    grad_flat,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Newton failed; ``residual`` holds the last residual sup-norm."""

    def __init__(self, msg: str, residual: float = float("nan"), step: int | None = None):
        super().__init__(msg)
        self.residual = residual
        self.step = step


@dataclass(frozen=True)
class SolverConfig:
    p: float
    epsilon: float = 1e-8
    newton_tol: float = 1e-9
    newton_max_iter: int = 60
    armijo_c: float = 1e-4
    min_step: float = 1e-12
    cg_rtol: float = 1e-11
    cg_max_iter: int = 5000

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1)

    def check_dimension(self, n: int) -> None:
        if not self.p > 2 * n / (n + 2):
            raise ValueError(f"p must exceed 2n/(n+2) = {2 * n / (n + 2):g}")


def flux(Q, p: float, epsilon: float = 0.0) -> np.ndarray:
    """Regularized flux ``(|Q|^2 + eps^2)^((p-2)/2) Q``; last two axes are ``(N, n)``."""
    Q = np.asarray(Q, dtype=float)
    sq = np.sum(Q**2, axis=(-2, -1), keepdims=True) + epsilon**2
    if p == 2:
        return Q.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(sq > 0, sq ** ((p - 2) / 2), 0.0)
    return a * Q


def flux_potential(Q, p: float, epsilon: float = 0.0) -> np.ndarray:
    """Primitive of :func:`flux`, vanishing at ``Q = 0``."""
    Q = np.asarray(Q, dtype=float)
    sq = np.sum(Q**2, axis=(-2, -1)) + epsilon**2
    return (sq ** (p / 2) - epsilon**p) / p


def _flux_jacobian_apply(Q, P, p, eps):
    sq = np.sum(Q**2, axis=(-2, -1), keepdims=True) + eps**2
    if p == 2:
        return P.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(sq > 0, sq ** ((p - 2) / 2), 0.0)
        qp = np.sum(Q * P, axis=(-2, -1), keepdims=True)
        corr = np.where(sq > 0, (p - 2) * a * qp / sq, 0.0)
    return a * P + corr * Q


class _StepProblem:
    """One implicit step on a fixed set of free cells."""

    def __init__(self, grid: Grid, u_prev, g, cfg: SolverConfig, tau: float, free: np.ndarray):
        self.grid = grid
        self.up = u_prev
        self.g = g
        self.cfg = cfg
        self.tau = tau
        self.free = free
        self.cv = grid.cell_volume
        self.chi = grid.flux_rows()

    def energy(self, v) -> float:
        Q = grad_flat(self.grid, v)
        cfg = self.cfg
        e = np.sum((v - self.up) ** 2) / (2 * self.tau)
        e += np.dot(self.chi, flux_potential(Q, cfg.p, cfg.epsilon))
        if self.g is not None:
            e -= np.dot(self.chi, np.sum(self.g * Q, axis=(-2, -1)))
        return self.cv * float(e)

    def residual(self, v, Q=None) -> np.ndarray:
        """Strong-form residual on all cells (divided by the cell volume)."""
        if Q is None:
            Q = grad_flat(self.grid, v)
        F = flux(Q, self.cfg.p, self.cfg.epsilon)
        if self.g is not None:
            F = F - self.g
        return (v - self.up) / self.tau - div_flat(self.grid, F)

    def hessian(self, Q) -> sp.csr_matrix:
        """Assembled ``I/tau + D^T A(Q) D`` on all ``size * N`` unknowns."""
        grid, cfg = self.grid, self.cfg
        p, eps = cfg.p, cfg.epsilon
        size, N, n = Q.shape
        sq = np.sum(Q**2, axis=(-2, -1)) + eps**2
        if p == 2:
            a = np.ones_like(sq)
            corr = np.zeros_like(sq)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.where(sq > 0, sq ** ((p - 2) / 2), 0.0)
                corr = np.where(sq > 0, (p - 2) * a / sq, 0.0)
        G = _component_ops(grid, N)
        H = sp.identity(size * N, format="csr") / self.tau
        a_rep = sp.diags(np.repeat(a * self.chi, N))
        for d in range(n):
            H = H + G[d].T @ a_rep @ G[d]
        if p != 2:
            rows = (np.arange(size)[:, None, None] * N + np.arange(N)[None, :, None]).repeat(N, 2)
            cols = (np.arange(size)[:, None, None] * N + np.arange(N)[None, None, :]).repeat(N, 1)
            for d in range(n):
                for e in range(n):
                    blk = (self.chi * corr)[:, None, None] * Q[:, :, d, None] * Q[:, None, :, e]
                    M = sp.csr_matrix((blk.ravel(), (rows.ravel(), cols.ravel())),
                                      shape=(size * N, size * N))
                    H = H + G[d].T @ M @ G[e]
        return H.tocsr()

    def newton_direction(self, v, Q, res_free) -> np.ndarray:
        cfg, free = self.cfg, self.free
        Ncomp = v.shape[1]
        idx = (free[:, None] * Ncomp + np.arange(Ncomp)[None, :]).ravel()
        H = self.hessian(Q)[idx][:, idx]
        diag = np.maximum(H.diagonal(), 1.0 / self.tau)
        prec = LinearOperator(H.shape, matvec=lambda x: x / diag, dtype=float)
        x, info = cg(H, -res_free.ravel(), rtol=cfg.cg_rtol, atol=0.0, maxiter=cfg.cg_max_iter,
                     M=prec)
        if info < 0:
            raise SolverError("conjugate gradient breakdown")
        d = np.zeros_like(v)
        d[free] = x.reshape(len(free), Ncomp)
        return d


@functools.lru_cache(maxsize=32)
def _component_ops_cached(n: int, m: int, h: float, bc: str, N: int):
    ops = _diff_ops(n, m, h, bc)
    return tuple(sp.kron(D, sp.identity(N), format="csr") for D in ops)


def _component_ops(grid: Grid, N: int):
    return _component_ops_cached(grid.n, grid.m, grid.h, grid.bc, N)


def _as_flat(grid: Grid, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape == grid.shape:
        u = u[..., None]
    return u.reshape(grid.size, grid.N).copy()


def _g_flat(grid: Grid, g) -> np.ndarray | None:
    if g is None:
        return None
    g = np.asarray(g, dtype=float)
    return g.reshape(grid.size, grid.N, grid.n)


def step_implicit(grid: Grid, u_prev, g_slice, cfg: SolverConfig, tau: float | None = None,
                  free: np.ndarray | None = None, boundary_values=None,
                  initial_guess=None) -> tuple[np.ndarray, int, float]:
    """Advance one backward-Euler step.

    ``u_prev`` has shape ``(*spatial, N)`` (or ``(*spatial,)`` when ``N == 1``);
    ``g_slice`` has shape ``(*spatial, N, n)`` or is ``None`` for ``g = 0``.
    Cells not in ``free`` (default: all cells off the two dirichlet layers) take
    their values from ``boundary_values`` (default: ``u_prev``).

    Returns the new slice as ``(*spatial, N)``, the Newton iteration count, and
    the final residual norm: the largest weak residual against a free cell's
    nodal test function, divided by that function's L2 norm (the strong
    residual times ``h^(n/2)``).
    """
    tau = grid.tau if tau is None else tau
    up = _as_flat(grid, u_prev)
    g = _g_flat(grid, g_slice)
    if free is None:
        free = np.flatnonzero(~grid.fixed_mask())
    prob = _StepProblem(grid, up, g, cfg, tau, free)

    v = up.copy() if initial_guess is None else _as_flat(grid, initial_guess)
    if boundary_values is not None:
        bv = _as_flat(grid, boundary_values)
        fixed = np.ones(grid.size, dtype=bool)
        fixed[free] = False
        v[fixed] = bv[fixed]

    J = prob.energy(v)
    scale = grid.cell_volume**0.5
    res_norm = float("inf")
    for it in range(cfg.newton_max_iter + 1):
        Q = grad_flat(grid, v)
        res = prob.residual(v, Q)[free]
        res_norm = scale * float(np.max(np.abs(res))) if res.size else 0.0
        if not np.isfinite(res_norm):
            raise SolverError("non-finite residual", res_norm)
        if res_norm <= cfg.newton_tol:
            return v.reshape(*grid.shape, grid.N), it, res_norm
        if it == cfg.newton_max_iter:
            break
        d = prob.newton_direction(v, Q, res)
        slope = prob.cv * float(np.sum(res * d[free]))
        alpha = 1.0
        # once the predicted decrease of J is below its round-off level, J can no
        # longer rank trial points and the residual norm serves as the merit function
        floor = 1e3 * np.finfo(float).eps * max(abs(J), prob.cv)
        while True:
            trial = v + alpha * d
            J_trial = prob.energy(trial)
            if -slope * alpha > floor:
                if J_trial <= J + cfg.armijo_c * alpha * slope:
                    break
            elif J_trial <= J + floor:
                r_trial = prob.residual(trial)[free]
                if scale * np.max(np.abs(r_trial)) < res_norm:
                    break
            alpha *= 0.5
            if alpha < cfg.min_step:
                raise SolverError(f"line search stagnated (residual {res_norm:.3e})", res_norm)
        v, J = trial, J_trial
    raise SolverError(f"Newton did not converge in {cfg.newton_max_iter} iterations "
                      f"(residual {res_norm:.3e})", res_norm)


@dataclass
class SolveResult:
    u: SpaceTimeField
    iterations: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    energy: np.ndarray | None = None


def energy_density(grid: Grid, u_slice, g_slice, p: float) -> float:
    """``int |grad u|^p / p - g : grad u`` for one slice."""
    Q = grad_flat(grid, _as_flat(grid, u_slice))
    e = np.sum(np.sum(Q**2, axis=(-2, -1)) ** (p / 2)) / p
    if g_slice is not None:
        e -= np.sum(_g_flat(grid, g_slice) * Q)
    return float(grid.cell_volume * e)


def solve(u0, g: GradientField | None, cfg: SolverConfig, grid: Grid | None = None) -> SolveResult:
    """Run :func:`step_implicit` over every slice; ``g.values[k]`` drives step ``k``."""
    if grid is None:
        if g is None:
            raise ValueError("grid required when g is None")
        grid = g.grid
    cfg.check_dimension(grid.n)
    u0 = _as_flat(grid, u0)
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial data must be finite")
    if g is not None and g.nslices != grid.steps + 1:
        raise ValueError("g must be given on every slice")
    out = np.empty((grid.steps + 1, grid.size, grid.N))
    out[0] = u0
    iters, resids = [], []
    energy = np.empty(grid.steps + 1)
    gk = None if g is None else g.values[0]
    energy[0] = energy_density(grid, u0, gk, cfg.p)
    for k in range(1, grid.steps + 1):
        gk = None if g is None else g.values[k]
        try:
            v, it, r = step_implicit(grid, out[k - 1], gk, cfg)
        except SolverError as exc:
            raise SolverError(f"step {k}: {exc}", exc.residual, step=k) from exc
        out[k] = v.reshape(grid.size, grid.N)
        iters.append(it)
        resids.append(r)
        energy[k] = energy_density(grid, out[k], gk, cfg.p)
    u = SpaceTimeField(grid, out.reshape(grid.steps + 1, *grid.shape, grid.N))
    return SolveResult(u, iters, resids, energy)


@dataclass
class CaloricSolution:
    """Comparison solution ``h`` on slices ``k0..k_top`` (``h = u`` off the unknown set)."""

    h: np.ndarray
    k0: int
    k_top: int
    ball: np.ndarray
    unknowns: np.ndarray
    iterations: list[int]
    residuals: list[float]

    def slice(self, k: int) -> np.ndarray:
        return self.h[k - self.k0]


def caloric_unknowns(grid: Grid, ball: np.ndarray) -> np.ndarray:
    """Ball cells whose whole difference stencil stays inside the ball.

    The remaining ball cells form the discrete ``dB_r`` ring where ``h = u``.
    """
    inball = np.zeros(grid.size, dtype=bool)
    inball[ball] = True
    ok = inball.copy()
    for D in diff_operators(grid):
        A = (D != 0).astype(int) + (D.T != 0).astype(int)
        outside = A @ (~inball).astype(int)
        ok &= outside == 0
    ok &= ~grid.fixed_mask()
    return np.flatnonzero(ok)


def solve_caloric(u: SpaceTimeField, k_top: int, x, r: float, s: float,
                  cfg: SolverConfig) -> CaloricSolution:
    """p-caloric comparison ``h`` on ``(t_k - s, t_k] x B_r(x)`` with ``h = u`` on its parabolic boundary.

    ``s`` is snapped to a whole number of steps (at least one).
    """
    grid = u.grid
    nsteps = max(1, int(round(s / grid.tau)))
    k0 = k_top - nsteps
    if k0 < 0:
        raise ValueError("cylinder reaches before the first slice")
    cells = ball_cells(grid, x, r)
    unknowns = caloric_unknowns(grid, cells)
    hs = np.empty((nsteps + 1, grid.size, grid.N))
    hs[0] = u.flat(k0)
    iters, resids = [], []
    for j in range(1, nsteps + 1):
        k = k0 + j
        if unknowns.size == 0:
            hs[j] = u.flat(k)
            iters.append(0)
            resids.append(0.0)
            continue
        prev = hs[j - 1].copy()
        bv = u.flat(k)
        guess = prev.copy()
        fixed = np.ones(grid.size, dtype=bool)
        fixed[unknowns] = False
        guess[fixed] = bv[fixed]
        try:
            v, it, res = step_implicit(grid, prev, None, cfg, free=unknowns,
                                       boundary_values=bv, initial_guess=guess)
        except SolverError as exc:
            raise SolverError(f"comparison step {k}: {exc}", exc.residual, step=k) from exc
        hs[j] = v.reshape(grid.size, grid.N)
        iters.append(it)
        resids.append(res)
    h = hs.reshape(nsteps + 1, *grid.shape, grid.N)
    return CaloricSolution(h, k0, k_top, cells, unknowns, iters, resids)
