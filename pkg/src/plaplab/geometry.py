"""Intrinsic cylinders: the duration ladder ``s(r)``, scaling factors ``lambda_r``,
K-intrinsic classification, and starting cubes.

A cylinder ``Q_r^lambda(t, x)`` is ``(t - lambda^(2-p) r^2, t] x B_r(x)``.  All
integrals use the cell-center inclusion rule and the piecewise-constant-in-time
convention of :mod:`plaplab.grid`, so the defining inequality of ``s~(r)`` and
the sub-intrinsic bound are satisfied exactly by the discrete quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .grid import (
    DegenerateRegionError,
    GradientField,
    Grid,
    Region,
    ball_cells,
    cylinder,
    region_average,
    time_weights,
)

Status = Literal["sub", "intrinsic", "super"]


@dataclass(frozen=True)
class ScaledCylinder:
    k_top: int
    x: tuple[float, ...]
    r: float
    s: float
    lam: float
    p: float

    def __post_init__(self):
        if not (self.r > 0 and self.s > 0 and self.lam > 0):
            raise ValueError("cylinder needs positive r, s and lambda")

    @classmethod
    def from_lambda(cls, k_top: int, x, r: float, lam: float, p: float) -> ScaledCylinder:
        s = r**2 if p == 2 else lam ** (2 - p) * r**2
        return cls(k_top, tuple(np.atleast_1d(x).astype(float).tolist()), r, s, lam, p)

    def region(self, grid: Grid) -> Region:
        return cylinder(grid, self.k_top, self.x, self.r, self.s)

    def scaled(self, theta: float) -> ScaledCylinder:
        """``theta Q``: radius ``theta r`` and duration ``theta^2 s``."""
        return replace(self, r=theta * self.r, s=theta**2 * self.s)

    def t(self, grid: Grid) -> float:
        return self.k_top * grid.tau


@dataclass(frozen=True)
class IntrinsicClass:
    status: Status
    K: float
    ratio: float


def energy_density(gradfield: GradientField, p: float) -> np.ndarray:
    """``|grad u|^p`` flattened to ``(slices, cells)``."""
    g = gradfield.grid
    return (gradfield.norm() ** p).reshape(gradfield.nslices, g.size)


class _BallHistory:
    """Per-slice integrals ``int_{B_r(x)} |grad u|^p`` for slices ``<= k_top``."""

    def __init__(self, dens: np.ndarray, grid: Grid, k_top: int, x, r: float):
        self.grid = grid
        self.k_top = k_top
        self.cells = ball_cells(grid, x, r)
        if len(self.cells) == 0:
            raise DegenerateRegionError("degenerate region")
        self.ball_measure = len(self.cells) * grid.cell_volume
        per = dens[1:k_top + 1][:, self.cells].sum(axis=1) * grid.cell_volume
        # reversed: slice k_top first
        self.rev = per[::-1]
        self.cum = np.concatenate([[0.0], np.cumsum(self.rev)])

    def integral(self, s: float) -> float:
        """``int_{t-s}^{t} int_{B_r} |grad u|^p`` with piecewise-constant slices."""
        tau = self.grid.tau
        full = int(math.floor(s / tau + 1e-12))
        full = min(full, len(self.rev))
        total = tau * self.cum[full]
        frac = s - full * tau
        if frac > 0 and full < len(self.rev):
            total += frac * self.rev[full]
        return float(total)


def _constraint_ok(hist: _BallHistory, r: float, s: float, p: float) -> bool:
    I = hist.integral(s)
    if I <= 0:
        return True
    lhs = (p - 2) * math.log(I) + 2 * math.log(s)
    rhs = 2 * p * math.log(r) + (p - 2) * math.log(hist.ball_measure)
    return lhs <= rhs


def _s_tilde(hist: _BallHistory, r: float, S: float, p: float, rtol: float) -> float:
    if _constraint_ok(hist, r, S, p):
        return S
    lo, hi = 0.0, S
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if _constraint_ok(hist, r, mid, p):
            lo = mid
        else:
            hi = mid
    return lo


def _check_history(grid: Grid, k_top: int, S: float) -> None:
    if S > k_top * grid.tau * (1 + 1e-12):
        raise DegenerateRegionError("outer duration S exceeds the available history")
    if S <= 0:
        raise DegenerateRegionError("degenerate region: S must be positive")


def s_tilde(r: float, center: tuple[int, tuple], S: float, gradfield: GradientField, p: float,
            rtol: float = 1e-8) -> float:
    """Largest ``s <= S`` with ``(int_{Q_{s,r}} |grad u|^p)^(p-2) s^2 <= r^(2p) |B_r|^(p-2)``."""
    if not p > 2:
        raise ValueError("s_tilde requires p > 2")
    if not r > 0:
        raise ValueError("r must be positive")
    k_top, x = center
    grid = gradfield.grid
    _check_history(grid, k_top, S)
    hist = _BallHistory(energy_density(gradfield, p), grid, k_top, x, r)
    return _s_tilde(hist, r, S, p, rtol)


def default_ladder(R: float, h: float, min_cells: float = 4.0) -> np.ndarray:
    """Radii ``R 2^(-j/2)`` down to the last one still ``>= min_cells * h``."""
    radii = [R]
    while R * 2 ** (-len(radii) / 2) >= min_cells * h:
        radii.append(R * 2 ** (-len(radii) / 2))
    return np.array(radii)


def s_of_r(radii: np.ndarray, s_tildes: np.ndarray, b: float) -> np.ndarray:
    """``s(r_j) = min_{i <= j} (r_j / r_i)^b s~(r_i)`` on a decreasing ladder."""
    if not 0 < b < 2:
        raise ValueError("b must lie in (0,2)")
    radii = np.asarray(radii, dtype=float)
    st = np.asarray(s_tildes, dtype=float)
    out = np.empty_like(st)
    for j, r in enumerate(radii):
        out[j] = np.min((r / radii[: j + 1]) ** b * st[: j + 1])
    return out


@dataclass
class CylinderFamily:
    k_top: int
    x: tuple[float, ...]
    R: float
    S: float
    b: float
    p: float
    radii: np.ndarray
    s_tilde: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    ratios: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def beta(self) -> float:
        return (2 - self.b) / (self.p - 2) if self.p > 2 else float("inf")

    def __len__(self) -> int:
        return len(self.radii)

    def cylinder(self, j: int) -> ScaledCylinder:
        return ScaledCylinder(self.k_top, self.x, float(self.radii[j]), float(self.s[j]),
                              float(self.lam[j]), self.p)

    def cylinders(self) -> list[ScaledCylinder]:
        return [self.cylinder(j) for j in range(len(self))]

    def statuses(self, K: float) -> list[Status]:
        return [_status(r, K) for r in self.ratios]

    def rows(self, K: float = 1.1) -> list[dict]:
        st = self.statuses(K)
        return [dict(r=float(self.radii[j]), s_tilde=float(self.s_tilde[j]), s=float(self.s[j]),
                     lam=float(self.lam[j]), ratio=float(self.ratios[j]), status=st[j])
                for j in range(len(self))]


def _status(ratio: float, K: float) -> Status:
    if ratio > K:
        return "super"
    if ratio < 1 / K:
        return "sub"
    return "intrinsic"


def mean_energy(gradfield: GradientField, region: Region, p: float) -> float:
    dens = gradfield.norm() ** p
    return float(region_average(dens, gradfield.grid, region))


def build_family(center: tuple[int, tuple], R: float, S: float, b: float,
                 gradfield: GradientField, p: float, ladder=None,
                 rtol: float = 1e-8) -> CylinderFamily:
    """The sub-intrinsic family ``Q_{s(r), r}`` on a decreasing radius ladder."""
    if not 0 < b < 2:
        raise ValueError("b must lie in (0,2)")
    k_top, x = center
    x = tuple(np.atleast_1d(x).astype(float).tolist())
    grid = gradfield.grid
    _check_history(grid, k_top, S)
    radii = default_ladder(R, grid.h) if ladder is None else np.sort(np.asarray(ladder, float))[::-1]
    if radii[0] > R * (1 + 1e-12):
        raise ValueError("ladder radii must not exceed R")
    dens = energy_density(gradfield, p)
    if p == 2:
        s = radii**2
        if s[0] > S * (1 + 1e-12):
            raise DegenerateRegionError("standard cylinder Q_{R^2,R} exceeds S")
        fam = CylinderFamily(k_top, x, R, S, b, p, radii, s.copy(), s, np.ones_like(radii))
    else:
        if not p > 2:
            raise ValueError("intrinsic families need p >= 2")
        st = np.array([_s_tilde(_BallHistory(dens, grid, k_top, x, r), r, S, p, rtol)
                       for r in radii])
        s = s_of_r(radii, st, b)
        lam = (radii**2 / s) ** (1 / (p - 2))
        fam = CylinderFamily(k_top, x, R, S, b, p, radii, st, s, lam)
    fam.ratios = np.array([_ratio(gradfield, Q, p) for Q in fam.cylinders()])
    return fam


def _ratio(gradfield: GradientField, Q: ScaledCylinder, p: float) -> float:
    e = mean_energy(gradfield, Q.region(gradfield.grid), p)
    return e ** (1 / p) / Q.lam


def classify(Q: ScaledCylinder, gradfield: GradientField, K: float = 1.1) -> IntrinsicClass:
    """Two-sided test ``lambda/K <= (mean |grad u|^p)^(1/p) <= K lambda``."""
    ratio = _ratio(gradfield, Q, Q.p)
    return IntrinsicClass(_status(ratio, K), K, ratio)


def first_intrinsic_radius(family: CylinderFamily, gradfield: GradientField,
                           K: float = 1.1) -> float | None:
    """Smallest ladder radius whose family cylinder is K-intrinsic."""
    best = None
    for j, Q in enumerate(family.cylinders()):
        if classify(Q, gradfield, K).status == "intrinsic":
            best = float(family.radii[j]) if best is None else min(best, float(family.radii[j]))
    return best


def starting_lambda_factor(n: int, p: float) -> float:
    """Factor ``lambda_{R/2} / lambda_0`` for the half-size starting cube.

    ``2^((n+2)/(p-2))``; for ``p > 4`` this is raised to ``2^((n+2)/2)``, the
    smallest factor that keeps the cube sub-intrinsic for every field.
    """
    return max(2 ** ((n + 2) / (p - 2)), 2 ** ((n + 2) / 2))


def standard_cube_lambda(gradfield: GradientField, k_top: int, x, R: float, p: float,
                         exponent: Literal["half", "p"] = "half") -> float:
    """``lambda_0 = max(m^e, 1)`` with ``m`` the mean of ``|grad u|^p`` over ``Q_{R^2,R}``.

    ``exponent="half"`` takes ``e = 1/2`` (this choice makes ``Q_R^{lambda_0}``
    sub-intrinsic); ``exponent="p"`` takes ``e = 1/p``.
    """
    reg = cylinder(gradfield.grid, k_top, x, R, R**2)
    m = mean_energy(gradfield, reg, p)
    e = 0.5 if exponent == "half" else 1 / p
    return max(m**e, 1.0)


class StartingCubeError(RuntimeError):
    pass


def starting_cube(z: tuple[int, tuple], outer: ScaledCylinder | tuple[int, tuple, float],
                  gradfield: GradientField, p: float, K: float = 1.1,
                  exponent: Literal["half", "p"] = "half") -> ScaledCylinder:
    """Sub-intrinsic cube of radius ``R/2`` centred at ``z`` inside ``outer``.

    ``outer`` is either a sub-intrinsic :class:`ScaledCylinder` or a standard
    parabolic cube given as ``(k_top, x, R)``.
    """
    grid = gradfield.grid
    if isinstance(outer, ScaledCylinder):
        lam0 = outer.lam
        base = outer
    else:
        k_top, x, R = outer
        lam0 = standard_cube_lambda(gradfield, k_top, x, R, p, exponent)
        base = ScaledCylinder.from_lambda(k_top, x, R, lam0, p)
    kz, xz = z
    tz = kz * grid.tau
    t = base.k_top * grid.tau
    dx = np.linalg.norm(grid.displacement(np.atleast_1d(xz)[None, :], np.asarray(base.x))[0])
    if dx > base.r / 2 * (1 + 1e-12) or tz > t + 1e-12 or tz < t - base.s / 4 - 1e-12:
        raise StartingCubeError("z is not in the half cylinder of the outer cube")
    if p == 2:
        cube = ScaledCylinder.from_lambda(kz, xz, base.r / 2, 1.0, p)
    else:
        lam = starting_lambda_factor(grid.n, p) * lam0
        cube = ScaledCylinder.from_lambda(kz, xz, base.r / 2, lam, p)
    try:
        cls = classify(cube, gradfield, K)
    except DegenerateRegionError as exc:
        raise StartingCubeError(f"starting cube degenerate: {exc}") from exc
    if cls.status == "super":
        raise StartingCubeError(f"starting cube not sub-intrinsic (ratio {cls.ratio:.4g})")
    return cube


# ---------------------------------------------------------------------------
# property checks on a built family


def _interval(Q_k_top: int, s: float, tau: float) -> tuple[float, float]:
    t = Q_k_top * tau
    return t - s, t


def check_family(family: CylinderFamily, gradfield: GradientField, tol: float = 1e-6,
                 K: float | None = None) -> dict:
    """Evaluate the ladder versions of the family properties.

    Returns a dict of booleans for items 1, 2, 3, 4, 6, 7 (lower bound), 8 and
    the empirical constant ``c7`` of the upper bound
    ``lambda_{theta r} <= c lambda_r theta^(-(n+2)/2)``.
    """
    grid = gradfield.grid
    p, b = family.p, family.b
    r, s, lam, st = family.radii, family.s, family.lam, family.s_tilde
    J = len(r)
    K = 1 + tol if K is None else K
    out = {}
    out["item1"] = bool(np.all(s <= family.S * (1 + tol)) and np.all(s >= 0)
                        and np.allclose(s, lam ** (2 - p) * r**2, rtol=tol))
    ok2 = True
    for j in range(J):
        for i in range(j):
            # r_j < r_i
            ok2 &= s[j] <= (r[j] / r[i]) ** b * s[i] * (1 + tol)
    out["item2"] = bool(ok2 and np.all(np.diff(s) < 0))
    out["item3"] = bool(np.all(family.ratios ** p <= 1 + tol))
    intrinsic = np.array([_status(q, K) == "intrinsic" for q in family.ratios])
    ok4 = True
    ok6 = True
    for j in range(J):
        for i in range(j):
            strict = s[j] < (r[j] / r[i]) ** b * s[i] * (1 - tol)
            if strict and not intrinsic[i + 1:j + 1].any():
                ok4 = False
            if not intrinsic[i + 1:j + 1].any():
                ok6 &= lam[j] <= (r[j] / r[i]) ** family.beta * lam[i] * (1 + tol)
    out["item4"] = bool(ok4)
    out["item6"] = bool(ok6)
    ok7 = True
    c7 = 0.0
    n = grid.n
    for j in range(J):
        for i in range(j):
            theta = r[j] / r[i]
            ok7 &= theta**family.beta * lam[i] <= lam[j] * (1 + tol)
            c7 = max(c7, lam[j] * theta ** ((n + 2) / 2) / lam[i])
    out["item7_lower"] = bool(ok7)
    out["c7"] = float(c7)
    ok8 = True
    for j in range(J):
        for i in range(j):
            sigma = r[j] / r[i]
            theta = sigma ** (b / 2)
            inner = set(ball_cells(grid, family.x, r[j]).tolist())
            outer = set(ball_cells(grid, family.x, theta * r[i]).tolist())
            ok8 &= inner <= outer
            ok8 &= s[j] <= theta**2 * s[i] * (1 + tol)
    out["item8"] = bool(ok8)
    out["s_le_s_tilde"] = bool(np.all(s <= st * (1 + tol)))
    return out


def family_time_weights(family: CylinderFamily, grid: Grid, j: int) -> dict[int, float]:
    return time_weights(grid, family.k_top, float(family.s[j]))
