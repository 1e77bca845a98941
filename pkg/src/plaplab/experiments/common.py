"""Shared pieces of the experiment harnesses: data profiles, fits, reports."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ..grid import GradientField, Grid, SpaceTimeField, gradient_field
from ..oscillation import v_map

# ratio above which an empirical constant counts as unstable under refinement
REFINEMENT_FACTOR = 3.0
MIN_R2 = 0.8


def periodic_distance(grid: Grid, x0: float) -> np.ndarray:
    x = grid.axis(0)
    d = np.abs(x - x0) % grid.L
    return np.minimum(d, grid.L - d)


def log_profile(grid: Grid, x0: float) -> np.ndarray:
    """``log|2 sin(pi (x - x0) / L)|``: periodic, mean zero, ``log|x - x0|`` near ``x0``.

    ``x0`` should sit on a cell face so no cell center hits the singularity.
    """
    return np.log(np.abs(2 * np.sin(np.pi * (grid.axis(0) - x0) / grid.L)))


def power_profile(grid: Grid, x0: float, exponent: float) -> np.ndarray:
    """``|x - x0|^exponent`` in the periodic distance."""
    return periodic_distance(grid, x0) ** exponent


def modulation(t, T: float, depth: float = 0.25) -> np.ndarray:
    return 1 + depth * np.sin(2 * np.pi * np.asarray(t) / T)


def g_field(grid: Grid, profile: np.ndarray, amplitude: float, time_factor=None) -> GradientField:
    """Data ``g(t, x) = A eta(t) profile(x) E`` with ``E`` the first unit matrix (n=1)."""
    if grid.n != 1:
        raise ValueError("profile data is one-dimensional")
    eta = np.ones(grid.steps + 1) if time_factor is None else np.asarray(time_factor(grid.times()))
    vals = amplitude * eta[:, None] * profile[None, :]
    out = np.zeros((grid.steps + 1, grid.m, grid.N, 1))
    out[..., 0, 0] = vals
    return GradientField(grid, out)


def face(grid: Grid, j: int) -> float:
    return grid.origin[0] + j * grid.h


def v_of(u: SpaceTimeField, p: float) -> np.ndarray:
    """``V(grad u)`` on every slice, shape ``(k, *shape, N * n)``."""
    G = gradient_field(u).values
    V = v_map(G, p)
    return V.reshape(*V.shape[:-2], -1)


@dataclass
class Fit:
    slope: float
    intercept: float
    r2: float
    stderr: float
    points: int

    @property
    def flagged(self) -> bool:
        return not (self.r2 >= MIN_R2)

    def to_json(self) -> dict:
        d = asdict(self)
        d["flagged_low_r2"] = self.flagged
        return d


def loglog_fit(x, y) -> Fit:
    """Least-squares line through ``(log x, log y)``; nonpositive ``y`` are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return Fit(float("nan"), float("nan"), float("nan"), float("nan"), int(keep.sum()))
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if np.ptp(ly) == 0:
        return Fit(0.0, float(ly[0]), 1.0, 0.0, int(keep.sum()))
    res = stats.linregress(lx, ly)
    return Fit(float(res.slope), float(res.intercept), float(res.rvalue**2), float(res.stderr),
               int(keep.sum()))


def refinement_stable(a: float, b: float, factor: float = REFINEMENT_FACTOR) -> bool:
    if not (math.isfinite(a) and math.isfinite(b)):
        return False
    if a == 0 and b == 0:
        return True
    if a <= 0 or b <= 0:
        return False
    return max(a / b, b / a) <= factor


@dataclass
class SweepReport:
    """Sweep over a control variable with measured quantities and checks."""

    name: str
    control: str
    values: list[float]
    rows: list[dict]
    fits: dict[str, dict] = field(default_factory=dict)
    constants: dict[str, float] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def csv_rows(self) -> list[dict]:
        return self.rows


@dataclass
class DecayReport:
    """Oscillation decay of ``V(grad h)`` on shrinking copies of an intrinsic cylinder."""

    p: float
    seed: int
    status: str
    lam: float = float("nan")
    rho: float = float("nan")
    s: float = float("nan")
    thetas: list[float] = field(default_factory=list)
    osc: list[float] = field(default_factory=list)
    phi: list[float] = field(default_factory=list)
    phi_rho: float = float("nan")
    alpha: float = float("nan")
    r2: float = float("nan")
    harnack: float = float("nan")
    harnack_refined: float = float("nan")
    exact_zero: bool = False
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def csv_rows(self) -> list[dict]:
        return [dict(p=self.p, seed=self.seed, theta=t, osc=o, phi=f)
                for t, o, f in zip(self.thetas, self.osc, self.phi)]
