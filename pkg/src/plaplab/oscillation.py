"""V-map, mean oscillations and the discrete seminorm scans.

Every ``sup`` over regions is a scan: centers on a stride lattice of spacing
``max(h, r/4)`` (halved when ``refine`` is set) and radii on the geometric
ladder ``R 2^(-j/2)``.  The scan is the discrete definition of each seminorm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .grid import (
    DegenerateRegionError,
    Grid,
    Region,
    ball,
    ball_inside,
    cylinder,
)
from .solver import flux


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class Weight:
    """Radial weight ``omega(r)``: ``one``, ``power`` (``r^gamma``) or a ``table``."""

    kind: Literal["one", "power", "table"] = "one"
    gamma: float = 0.0
    c1: float = 1.0
    table: tuple[tuple[float, float], ...] = ()

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "one":
            return np.ones_like(r)
        if self.kind == "power":
            return r**self.gamma
        rs, ws = np.array(self.table).T
        return np.exp(np.interp(np.log(r), np.log(rs), np.log(ws)))

    def power(self, e: float) -> Weight:
        """``omega^e`` (e.g. ``omega' = omega^(p-1)``)."""
        if self.kind == "one":
            return self
        if self.kind == "power":
            return Weight("power", self.gamma * e, self.c1**e)
        return Weight("table", 0.0, self.c1**e, tuple((r, w**e) for r, w in self.table))

    def almost_increasing_constant(self, radii) -> float:
        """Smallest ``c`` with ``omega(r) <= c omega(rho)`` for sampled ``r < rho``."""
        r = np.sort(np.asarray(radii, dtype=float))
        w = self(r)
        running_max = np.maximum.accumulate(w)
        return float(np.max(running_max / w))

    def satisfies_decay(self, p: float, radii, sigmas) -> bool:
        """Check ``omega(r) / omega(sigma r) <= c1 sigma^(-gamma/p)`` on samples."""
        for r in radii:
            for s in sigmas:
                if self(r) / self(s * r) > self.c1 * s ** (-self.gamma / p) * (1 + 1e-12):
                    return False
        return True


ONE = Weight()


# ---------------------------------------------------------------------------
# pointwise maps


def v_map(Q, p: float) -> np.ndarray:
    """``V(Q) = |Q|^((p-2)/2) Q`` over the trailing ``(N, n)`` axes."""
    Q = np.asarray(Q, dtype=float)
    if p == 2:
        return Q.copy()
    nrm = np.sqrt(np.sum(Q**2, axis=(-2, -1), keepdims=True))
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(nrm > 0, nrm ** ((p - 2) / 2), 0.0)
    return a * Q


# ---------------------------------------------------------------------------
# region statistics on plain arrays indexed (k, *spatial, ...)


def _vals(values: np.ndarray, grid: Grid, region: Region):
    ks = region.slices
    flat = values.reshape(values.shape[0], grid.size, -1)
    vals = flat[ks][:, region.cells]
    w = np.array([region.time_weights[k] for k in ks])
    return vals, w / w.sum()


def region_mean(values, grid, region) -> np.ndarray:
    vals, w = _vals(values, grid, region)
    return np.tensordot(w, vals.mean(axis=1), axes=(0, 0))


def mean_osc(values: np.ndarray, grid: Grid, region: Region, q: float = 1.0) -> float:
    """``(mean_R |f - <f>_R|^q)^(1/q)``; vector values use the Euclidean norm."""
    if q < 1:
        raise ValueError("q must be >= 1")
    vals, w = _vals(values, grid, region)
    mean = np.tensordot(w, vals.mean(axis=1), axes=(0, 0))
    dev = np.sqrt(np.sum((vals - mean) ** 2, axis=-1))
    return float(np.dot(w, np.mean(dev**q, axis=1)) ** (1 / q))


def mean_dist(values, grid, region, c, q: float = 1.0) -> float:
    """``(mean_R |f - c|^q)^(1/q)``."""
    vals, w = _vals(values, grid, region)
    dev = np.sqrt(np.sum((vals - np.asarray(c).reshape(-1)) ** 2, axis=-1))
    return float(np.dot(w, np.mean(dev**q, axis=1)) ** (1 / q))


def osc(values: np.ndarray, grid: Grid, region: Region) -> float:
    """``sup_{x,y in R} |f(x) - f(y)|`` over the region's cells and slices."""
    vals, _ = _vals(values, grid, region)
    pts = vals.reshape(-1, vals.shape[-1])
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    best = 0.0
    for start in range(0, len(pts), 2048):
        chunk = pts[start:start + 2048]
        d = np.sqrt(((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        best = max(best, float(d.max()))
    return best


# ---------------------------------------------------------------------------
# scans


@dataclass
class SeminormValue:
    name: str
    value: float
    witness: Region | None
    regions_tried: int = 0
    scan_density: int = 0
    weight: str = "one"
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        w = self.witness
        wit = None if w is None else dict(center=list(w.center), r=w.radius, s=w.duration)
        return dict(name=self.name, weight=self.weight, value=self.value, witness=wit,
                    scan_density=self.scan_density, regions_tried=self.regions_tried, **self.extra)


@dataclass(frozen=True)
class Box:
    """Scan domain: spatial box ``[lo, hi]`` per axis and slices ``k_lo..k_hi``.

    A ``ball_center``/``ball_radius`` pair restricts the domain to a ball instead.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    k_lo: int = 0
    k_hi: int = 0
    ball_center: tuple[float, ...] | None = None
    ball_radius: float | None = None

    @classmethod
    def whole(cls, grid: Grid, k_lo: int = 0, k_hi: int | None = None) -> Box:
        lo = tuple(grid.origin)
        hi = tuple(o + grid.L for o in grid.origin)
        return cls(lo, hi, k_lo, grid.steps if k_hi is None else k_hi)

    @classmethod
    def ball_domain(cls, grid: Grid, x, R: float, k_lo: int = 0, k_hi: int | None = None) -> Box:
        x = tuple(np.atleast_1d(x).astype(float).tolist())
        lo = tuple(c - R for c in x)
        hi = tuple(c + R for c in x)
        return cls(lo, hi, k_lo, grid.steps if k_hi is None else k_hi, x, R)

    def contains_ball(self, grid: Grid, x, r: float) -> bool:
        x = np.atleast_1d(x)
        if self.ball_center is not None:
            d = np.linalg.norm(grid.displacement(x[None, :], np.asarray(self.ball_center))[0])
            return d + r <= self.ball_radius * (1 + 1e-12)
        if grid.bc == "dirichlet" or self.lo != tuple(grid.origin) or \
                self.hi != tuple(o + grid.L for o in grid.origin):
            return bool(np.all(x - r >= np.asarray(self.lo) - 1e-12)
                        and np.all(x + r <= np.asarray(self.hi) + 1e-12)
                        and ball_inside(grid, x, r))
        return 2 * r < grid.L

    def centers(self, grid: Grid, r: float, refine: int = 0) -> list[tuple[float, ...]]:
        stride = max(grid.h, r / 4) / 2**refine
        axes = []
        for d in range(grid.n):
            start = self.lo[d] + r
            stop = self.hi[d] - r
            if grid.bc == "periodic" and self.ball_center is None and \
                    self.lo == tuple(grid.origin) and self.hi == tuple(o + grid.L for o in grid.origin):
                start, stop = self.lo[d] + 0.5 * grid.h, self.hi[d] - 0.5 * grid.h
            if stop < start - 1e-12:
                return []
            cnt = int(math.floor((stop - start) / stride + 1e-9)) + 1
            axes.append(start + stride * np.arange(cnt))
        pts = [tuple(float(c) for c in pt) for pt in itertools.product(*axes)]
        return [pt for pt in pts if self.contains_ball(grid, pt, r)]


def ladder(R: float, h: float, min_cells: float = 1.0) -> np.ndarray:
    radii = [R]
    while R * 2 ** (-len(radii) / 2) >= min_cells * h:
        radii.append(R * 2 ** (-len(radii) / 2))
    return np.array(radii)


def _scan_max(candidates, evaluate) -> tuple[float, Region | None, int]:
    best, wit, count = -1.0, None, 0
    for key, region in candidates:
        val = evaluate(region)
        count += 1
        # ties broken by the lexicographically smallest key
        if val > best or (val == best and wit is not None and key < wit[0]):
            best, wit = val, (key, region)
    return max(best, 0.0), (None if wit is None else wit[1]), count


def bmo_par(values: np.ndarray, grid: Grid, domain: Box | None = None, weight: Weight = ONE,
            q: float = 1.0, radii=None, refine: int = 0) -> SeminormValue:
    """``sup_{Q_{r^2,r} in domain} (1/omega(r)) (mean |f - <f>_Q|^q)^(1/q)``."""
    domain = Box.whole(grid) if domain is None else domain
    if radii is None:
        span = min(hi - lo for lo, hi in zip(domain.lo, domain.hi))
        radii = ladder(span / 4 if domain.ball_center is None else domain.ball_radius / 2, grid.h)

    def cands():
        for r in radii:
            s = r**2
            k_stride = max(1, int(round(max(grid.tau, s / 4) / grid.tau)) // 2**refine)
            k_start = max(domain.k_lo + int(math.ceil(s / grid.tau - 1e-9)), domain.k_lo + 1)
            centers = domain.centers(grid, r, refine)
            for k in range(k_start, domain.k_hi + 1, k_stride):
                for x in centers:
                    yield (k, x, -r), cylinder(grid, k, x, r, s)

    w = weight
    val, wit, cnt = _scan_max(cands(), lambda reg: mean_osc(values, grid, reg, q) / float(w(reg.radius)))
    return SeminormValue("bmo_par", val, wit, cnt, refine, w.kind)


def bochner_bmo(values: np.ndarray, grid: Grid, domain: Box | None = None, weight: Weight = ONE,
                q: float = 1.0, radii=None, refine: int = 0) -> SeminormValue:
    """``sup_{t, B_r} (1/omega(r)) (mean_{B_r} |f(t) - <f(t)>_{B_r}|^q)^(1/q)``.

    Time windows shrink to single slices: the time average of a nonnegative
    quantity never exceeds its maximum, so the sup is attained on one slice.
    """
    domain = Box.whole(grid) if domain is None else domain
    if radii is None:
        span = min(hi - lo for lo, hi in zip(domain.lo, domain.hi))
        radii = ladder(span / 4 if domain.ball_center is None else domain.ball_radius, grid.h)

    def cands():
        for r in radii:
            centers = domain.centers(grid, r, refine)
            for k in range(max(domain.k_lo, 0), domain.k_hi + 1):
                for x in centers:
                    yield (k, x, -r), ball(grid, x, r, k)

    w = weight
    val, wit, cnt = _scan_max(cands(), lambda reg: mean_osc(values, grid, reg, q) / float(w(reg.radius)))
    return SeminormValue("bochner_bmo", val, wit, cnt, refine, w.kind)


def best_linear(values: np.ndarray, grid: Grid, region: Region) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Least-squares affine fit ``l(y) = a + B (y - x)`` over a single-slice ball.

    Returns ``(a, B, residual)`` with ``a`` of shape ``(N,)``, ``B`` of shape
    ``(N, n)`` and the residual ``f - l`` on the region's cells.
    """
    if len(region.slices) != 1:
        raise ValueError("best_linear needs a single-slice region")
    if len(region.cells) < grid.n + 1:
        raise DegenerateRegionError("degenerate cell set for affine fit")
    k = region.slices[0]
    f = values[k].reshape(grid.size, -1)[region.cells]
    x = np.asarray(region.center[1:], dtype=float)
    y = grid.displacement(grid.centers()[region.cells], x)
    A = np.hstack([np.ones((len(y), 1)), y])
    if np.linalg.matrix_rank(A) < grid.n + 1:
        raise DegenerateRegionError("degenerate cell set for affine fit")
    coef, *_ = np.linalg.lstsq(A, f, rcond=None)
    resid = f - A @ coef
    return coef[0], coef[1:].T, resid


def linear_residual(values, grid, region, q: float = 2.0) -> float:
    """``(mean_B |f - l_B(f)|^q)^(1/q)`` with ``l_B`` the L2-best affine map."""
    _, _, res = best_linear(values, grid, region)
    dev = np.sqrt(np.sum(res**2, axis=-1))
    return float(np.mean(dev**q) ** (1 / q))


def blo_seminorm(values: np.ndarray, grid: Grid, domain: Box | None = None, weight: Weight = ONE,
                 q: float = 2.0, radii=None, slices=None, refine: int = 0) -> SeminormValue:
    """``sup_{B_r} (1/omega(r)) (mean_B |(f - l)/r|^q)^(1/q)`` with ``l`` the L2-best affine map.

    For ``q != 2`` the L2 minimizer is used, which bounds the infimum from above.
    """
    domain = Box.whole(grid) if domain is None else domain
    if radii is None:
        span = min(hi - lo for lo, hi in zip(domain.lo, domain.hi))
        rmax = span / 4 if domain.ball_center is None else domain.ball_radius
        radii = ladder(rmax, grid.h, min_cells=2.0)
    slices = range(domain.k_lo, domain.k_hi + 1) if slices is None else slices

    def cands():
        for r in radii:
            centers = domain.centers(grid, r, refine)
            for k in slices:
                for x in centers:
                    reg = ball(grid, x, r, k)
                    if len(reg.cells) >= grid.n + 2:
                        yield (k, x, -r), reg

    w = weight
    val, wit, cnt = _scan_max(
        cands(), lambda reg: linear_residual(values, grid, reg, q) / reg.radius / float(w(reg.radius)))
    return SeminormValue("blo", val, wit, cnt, refine, w.kind)


def zygmund_seminorm(values: np.ndarray, grid: Grid, gamma: float, k: int = 0,
                     max_step: int | None = None) -> dict:
    """Second-difference part ``sup |f(x+2h) - 2f(x+h) + f(x)| / |h|^gamma`` and ``sup |f|``.

    Steps ``h`` range over lattice vectors with entries up to ``max_step`` cells
    (default: all steps that fit); under periodic bc differences wrap around.
    """
    if not 0 < gamma <= 2:
        raise ValueError("gamma must lie in (0,2]")
    f = values[k].reshape(*grid.shape, -1)
    m = grid.m
    limit = (m - 1) // 2 if grid.bc == "dirichlet" else m // 2
    if max_step is not None:
        limit = min(limit, max_step)
    best, arg = 0.0, None
    rng = range(-limit, limit + 1)
    for step in itertools.product(rng, repeat=grid.n):
        if all(s == 0 for s in step) or next(s for s in step if s != 0) < 0:
            continue
        hlen = grid.h * math.sqrt(sum(s * s for s in step))
        if grid.bc == "periodic":
            f1 = np.roll(f, [-s for s in step], axis=tuple(range(grid.n)))
            f2 = np.roll(f, [-2 * s for s in step], axis=tuple(range(grid.n)))
            d2 = f2 - 2 * f1 + f
        else:
            sl0, sl1, sl2 = [], [], []
            ok = True
            for s in step:
                span = 2 * abs(s)
                if span >= m:
                    ok = False
                    break
                if s >= 0:
                    sl0.append(slice(0, m - span))
                    sl1.append(slice(s, m - span + s))
                    sl2.append(slice(2 * s, m))
                else:
                    sl0.append(slice(span, m))
                    sl1.append(slice(span + s, m + s))
                    sl2.append(slice(0, m - span))
            if not ok:
                continue
            d2 = f[tuple(sl2)] - 2 * f[tuple(sl1)] + f[tuple(sl0)]
        val = float(np.max(np.sqrt(np.sum(d2**2, axis=-1)))) / hlen**gamma
        if val > best:
            best, arg = val, step
    sup = float(np.max(np.sqrt(np.sum(f**2, axis=-1))))
    return dict(second_difference=best, sup_norm=sup, total=best + sup,
                step=None if arg is None else list(arg))


# ---------------------------------------------------------------------------
# ellipticity sampling


def hammer_ratios(P: np.ndarray, Q: np.ndarray, p: float, G: np.ndarray | None = None,
                  deltas=(1.0, 0.1)) -> dict:
    """Sampled constants of the monotonicity/V-map equivalences.

    ``P``, ``Q`` (and ``G = G1 - G0``) have shape ``(samples, N, n)``.
    """
    FP, FQ = flux(P, p), flux(Q, p)
    VP, VQ = v_map(P, p), v_map(Q, p)
    dV2 = np.sum((VQ - VP) ** 2, axis=(-2, -1))
    mono = np.sum((FQ - FP) * (Q - P), axis=(-2, -1))
    dPQ = np.sqrt(np.sum((P - Q) ** 2, axis=(-2, -1)))
    keep = dV2 > 0
    ratio = mono[keep] / dV2[keep]
    dF = np.sqrt(np.sum((FQ - FP) ** 2, axis=(-2, -1)))
    nQ = np.sqrt(np.sum(Q**2, axis=(-2, -1)))
    out = dict(p=p, samples=int(len(P)), ratio_min=float(ratio.min()), ratio_max=float(ratio.max()),
               flux_ratio_min=float(np.min(dF[keep] / np.maximum(
                   (nQ[keep] + dPQ[keep]) ** (p - 2) * dPQ[keep], 1e-300))),
               flux_ratio_max=float(np.max(dF[keep] / np.maximum(
                   (nQ[keep] + dPQ[keep]) ** (p - 2) * dPQ[keep], 1e-300))))
    if p >= 2:
        out["nervig_c"] = float(np.max(dPQ[keep] ** p / dV2[keep]))
    if G is not None:
        pd = p / (p - 1)
        nG = np.sqrt(np.sum(G**2, axis=(-2, -1)))
        lhs = nG * dPQ
        weights = {"stated": (nQ + nG) ** (pd - 2) * nG**2,
                   "shifted": (nQ ** (p - 1) + nG) ** (pd - 2) * nG**2}
        for name, base in weights.items():
            for delta in deltas:
                excess = lhs - delta * dV2
                ok = base > 0
                c = float(np.max(np.where(ok, excess, -np.inf)[ok] / base[ok])) if ok.any() else 0.0
                out[f"hammer2_{name}_c_delta{delta:g}"] = max(c, 0.0)
    return out


# ---------------------------------------------------------------------------
# John-Nirenberg and appendix inequalities


def john_nirenberg_check(values, grid: Grid, region: Region, q: float, radii=None) -> dict:
    """``(mean_B |f - <f>_B|^q)^(1/q) / ||f||_BMO(B)`` for a single-slice ball ``B``."""
    if not 1 <= q <= 8:
        raise ValueError("q must lie in [1, 8]")
    x = region.center[1:]
    k = region.slices[0]
    dom = Box.ball_domain(grid, x, region.radius, k, k)
    norm = bochner_bmo(values, grid, dom, ONE, 1.0, radii=radii)
    lhs = mean_osc(values, grid, region, q)
    if norm.value == 0:
        return dict(lhs=lhs, bmo=0.0, ratio=float("nan"), degenerate=True)
    return dict(lhs=lhs, bmo=norm.value, ratio=lhs / norm.value, degenerate=False)


def _mean(f, w, idx):
    return float(np.dot(f[idx], w[idx]) / w[idx].sum())


def _mo(f, w, idx, q, about=None):
    c = _mean(f, w, idx) if about is None else about
    return float((np.dot(np.abs(f[idx] - c) ** q, w[idx]) / w[idx].sum()) ** (1 / q))


def means_inequality(f, w, inner, outer, q) -> dict:
    """``|<f>_1 - <f>_2| <= (mean_1 |f - <f>_2|^q)^(1/q) <= ((|Q2|/|Q1|) mean_2 |f - <f>_2|^q)^(1/q)``."""
    m1, m2 = _mean(f, w, inner), _mean(f, w, outer)
    a = abs(m1 - m2)
    b = _mo(f, w, inner, q, about=m2)
    ratio = w[outer].sum() / w[inner].sum()
    c = (ratio * _mo(f, w, outer, q) ** q) ** (1 / q)
    slack = 1e-12 * (1 + abs(m2) + np.max(np.abs(f[outer])))
    return dict(lhs=a, mid=b, rhs=c, holds=bool(a <= b + slack and b <= c + slack))


def iterated_means_inequality(f, w, chain, q) -> dict:
    """``|<f>_k - <f>_0| <= sum_i (|Q_{i-1}|/|Q_i|)^(1/q) (mean_{i-1} |f - <f>_{i-1}|^q)^(1/q)``."""
    lhs = abs(_mean(f, w, chain[-1]) - _mean(f, w, chain[0]))
    rhs = 0.0
    for prev, cur in zip(chain[:-1], chain[1:]):
        rhs += (w[prev].sum() / w[cur].sum()) ** (1 / q) * _mo(f, w, prev, q)
    slack = 1e-12 * (1 + np.max(np.abs(f[chain[0]]))) * len(chain)
    return dict(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + slack))


def small_mean_inequality(f, w, inner, outer, q, eps) -> dict:
    """If ``|<f>_1| <= eps ||f||_q`` then ``eps ||f||_q <= eps/(1-eps) (1 + (|Q|/|Q1|)^(1/q)) mo_q``."""
    norm_q = float((np.dot(np.abs(f[outer]) ** q, w[outer]) / w[outer].sum()) ** (1 / q))
    m1 = _mean(f, w, inner)
    if abs(m1) > eps * norm_q:
        return dict(hypothesis=False, holds=True)
    ratio = w[outer].sum() / w[inner].sum()
    rhs = eps / (1 - eps) * (1 + ratio ** (1 / q)) * _mo(f, w, outer, q)
    lhs = eps * norm_q
    return dict(hypothesis=True, lhs=lhs, rhs=rhs,
                holds=bool(lhs <= rhs + 1e-12 * (1 + norm_q)))


def dini_oscillation_check(f, w, chains: dict, outer, q, omega: Callable, theta: float,
                           c1: float) -> dict:
    """Oscillation bound from dyadic mean-oscillation decay.

    ``chains`` maps each point index ``z`` of the inner region to its nested
    chain ``Q_0 = theta Q_rho > Q_1(z) > ... > Q_k(z) = {z}``.  Hypothesis:
    ``mo_q(Q_i(z)) <= c1 omega(2^-i theta) mo_q(Q_rho)`` for every chain member
    but the last.  Conclusion:
    ``osc f <= 2 c_r c1 sum_i omega(2^-i theta) mo_q(Q_rho)`` with ``c_r`` the
    largest ``(|Q_{i-1}|/|Q_i|)^(1/q)`` along the chains.
    """
    base = _mo(f, w, outer, q)
    cr = 1.0
    for chain in chains.values():
        for prev, cur in zip(chain[:-1], chain[1:]):
            cr = max(cr, (w[prev].sum() / w[cur].sum()) ** (1 / q))
        for i, reg in enumerate(chain[:-1]):
            if _mo(f, w, reg, q) > c1 * omega(2.0**-i * theta) * base * (1 + 1e-12) + 1e-300:
                return dict(hypothesis=False, holds=True)
    depth = max(len(c) for c in chains.values())
    dini = sum(omega(2.0**-i * theta) for i in range(depth))
    pts = np.array(list(chains))
    lhs = float(f[pts].max() - f[pts].min())
    rhs = 2 * cr * c1 * dini * base
    return dict(hypothesis=True, lhs=lhs, rhs=rhs, constant=2 * cr * c1, dini_sum=dini,
                holds=bool(lhs <= rhs + 1e-12 * (1 + np.max(np.abs(f)))))


def _dyadic_chain(lo: int, hi: int, z: int) -> list[np.ndarray]:
    chain = [np.arange(lo, hi)]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if z < mid else (mid, hi)
        chain.append(np.arange(lo, hi))
    return chain


def appendix_validators(cases: int = 10_000, seed: int = 0, q_choices=(1.0, 2.0, 3.0),
                        omega: Callable | None = None) -> dict:
    """Random discrete cases for the four mean/oscillation inequalities.

    Each case draws a function on ``2^k`` points with random positive
    measures; regions are dyadic intervals.  For the Dini check ``c1`` is the
    smallest constant meeting the hypothesis, so the conclusion is exercised.
    """
    rng = np.random.default_rng(seed)
    omega = (lambda r: r**0.5) if omega is None else omega
    out = {name: dict(cases=0, violations=0, hypothesis_not_met=0)
           for name in ("means", "meanit", "osc", "osc2")}
    for _ in range(cases):
        k = int(rng.integers(2, 7))
        npts = 2**k
        f = rng.standard_normal(npts) * rng.choice([1e-3, 1.0, 1e3])
        w = rng.uniform(0.1, 1.0, npts)
        q = float(rng.choice(q_choices))
        z = int(rng.integers(npts))
        chain = _dyadic_chain(0, npts, z)

        i = int(rng.integers(1, len(chain)))
        res = means_inequality(f, w, chain[i], chain[0], q)
        out["means"]["cases"] += 1
        out["means"]["violations"] += not res["holds"]

        res = iterated_means_inequality(f, w, chain[: i + 1], q)
        out["meanit"]["cases"] += 1
        out["meanit"]["violations"] += not res["holds"]

        eps = float(rng.uniform(0.05, 0.95))
        g = f - _mean(f, w, chain[i]) + rng.uniform(-1, 1) * eps * abs(f).max() * 0.1
        res = small_mean_inequality(g, w, chain[i], chain[0], q, eps)
        out["osc"]["cases"] += 1
        out["osc"]["violations"] += not res["holds"]
        out["osc"]["hypothesis_not_met"] += not res["hypothesis"]

        half = npts // 2
        theta = 0.5
        chains = {j: _dyadic_chain(0, half, j) for j in range(half)}
        base = _mo(f, w, np.arange(npts), q)
        c1 = 0.0
        for ch in chains.values():
            for d, reg in enumerate(ch[:-1]):
                c1 = max(c1, _mo(f, w, reg, q) / (omega(2.0**-d * theta) * base))
        res = dini_oscillation_check(f, w, chains, np.arange(npts), q, omega, theta, c1)
        out["osc2"]["cases"] += 1
        out["osc2"]["violations"] += not res["holds"]
        out["osc2"]["hypothesis_not_met"] += not res["hypothesis"]
    return out
