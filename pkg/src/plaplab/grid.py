"""Discrete space-time grids, fields, regions and finite-difference operators.

Cells are uniform squares (intervals in 1D) of side ``h = L / m``; cell centers
sit at ``origin + (i + 1/2) h``.  Slice ``k`` of a field lives at ``t_k = k tau``
and, for integrals in time, represents the interval ``(t_{k-1}, t_k]``.
"""

from __future__ import annotations

import functools
import io
import struct
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr, splu

BC = Literal["periodic", "dirichlet"]


class DegenerateRegionError(ValueError):
    """Raised when a region contains no cells or has zero measure."""


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    m: int
    L: float
    tau: float
    T: float
    bc: BC = "periodic"
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("spatial dimension n must be 1 or 2")
        if self.N < 1:
            raise ValueError("target dimension N must be >= 1")
        if self.m < 8:
            raise ValueError("m must be at least 8")
        if not self.tau > 0 or not self.L > 0:
            raise ValueError("tau and L must be positive")
        if self.bc not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        steps = self.T / self.tau
        if round(steps) < 1 or abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
            raise ValueError("T / tau must be a positive integer")
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.n)
        elif len(self.origin) != self.n:
            raise ValueError("origin must have n entries")
        else:
            object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def h(self) -> float:
        return self.L / self.m

    @property
    def steps(self) -> int:
        return int(round(self.T / self.tau))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.steps + 1)

    def axis(self, d: int = 0) -> np.ndarray:
        return self.origin[d] + (np.arange(self.m) + 0.5) * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, each of shape ``self.shape``."""
        return tuple(np.meshgrid(*[self.axis(d) for d in range(self.n)], indexing="ij"))

    def centers(self) -> np.ndarray:
        """Flat ``(size, n)`` array of cell centers in C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def with_steps(self, tau: float, steps: int) -> Grid:
        return Grid(self.n, self.N, self.m, self.L, tau, tau * steps, self.bc, self.origin)

    def refined(self, factor: int = 2) -> Grid:
        return Grid(self.n, self.N, self.m * factor, self.L, self.tau, self.T, self.bc, self.origin)

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        """Flat mask of cells within ``width`` layers of the boundary (empty if periodic)."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.bc == "dirichlet":
            for d in range(self.n):
                idx = [slice(None)] * self.n
                idx[d] = slice(0, width)
                mask[tuple(idx)] = True
                idx[d] = slice(self.m - width, self.m)
                mask[tuple(idx)] = True
        return mask.ravel()

    def fixed_mask(self) -> np.ndarray:
        """Cells held by dirichlet data in the solver: the two outer layers."""
        return self.boundary_mask(2)

    def flux_rows(self) -> np.ndarray:
        """Weights of the cells whose flux enters the discrete divergence.

        Cells on the outer dirichlet layer use one-sided gradient stencils; they
        are excluded so that constant fluxes are divergence free at every
        solver cell.
        """
        return (~self.boundary_mask(1)).astype(float)

    def displacement(self, points: np.ndarray, x: np.ndarray) -> np.ndarray:
        """``points - x`` using the minimal image under periodic bc."""
        diff = np.asarray(points, dtype=float) - np.asarray(x, dtype=float)
        if self.bc == "periodic":
            diff = diff - self.L * np.round(diff / self.L)
        return diff


@dataclass(frozen=True)
class SpaceTimeField:
    """Values indexed ``(k, *spatial, component)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = (self.grid.steps + 1, *self.grid.shape, self.grid.N)
        if v.shape != expected:
            raise ValueError(f"field shape {v.shape} does not match grid {expected}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def slice(self, k: int) -> np.ndarray:
        return self.values[k]

    def flat(self, k: int) -> np.ndarray:
        """Slice ``k`` as a ``(size, N)`` array."""
        return self.values[k].reshape(self.grid.size, self.grid.N)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> SpaceTimeField:
        """Sample ``fn(t, *coords)`` returning an array broadcastable to ``(*shape, N)``."""
        coords = grid.coords()
        out = np.empty((grid.steps + 1, *grid.shape, grid.N))
        for k, t in enumerate(grid.times()):
            val = np.asarray(fn(t, *coords), dtype=float)
            if val.shape == grid.shape:
                val = val[..., None]
            out[k] = np.broadcast_to(val, (*grid.shape, grid.N))
        return cls(grid, out)

    @classmethod
    def constant_in_time(cls, grid: Grid, spatial: np.ndarray) -> SpaceTimeField:
        spatial = np.asarray(spatial, dtype=float)
        if spatial.shape == grid.shape:
            spatial = spatial[..., None]
        return cls(grid, np.broadcast_to(spatial, (grid.steps + 1, *grid.shape, grid.N)).copy())


@dataclass(frozen=True)
class GradientField:
    """Values indexed ``(k, *spatial, component, direction)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        g = self.grid
        if v.shape[1:] != (*g.shape, g.N, g.n):
            raise ValueError("gradient field shape inconsistent with grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("gradient values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def nslices(self) -> int:
        return self.values.shape[0]

    def norm(self) -> np.ndarray:
        """Frobenius norm per cell, shape ``(k, *spatial)``."""
        return np.sqrt(np.sum(self.values**2, axis=(-2, -1)))

    def scaled(self, a: float) -> GradientField:
        return GradientField(self.grid, a * self.values)


@dataclass(frozen=True)
class Region:
    """A set of grid cells with a time footprint.

    ``cells`` are flat spatial indices; ``time_weights`` maps slice index to the
    length of time that slice contributes (``{k: 1.0}`` for a single-slice ball).
    """

    kind: Literal["ball", "cylinder", "slab"]
    center: tuple[float, ...]
    radius: float
    duration: float
    cells: np.ndarray
    time_weights: dict[int, float] = field(default_factory=dict)
    cell_volume: float = 1.0

    def __post_init__(self):
        if len(self.cells) == 0 or not self.time_weights:
            raise DegenerateRegionError("degenerate region")
        if self.measure <= 0:
            raise DegenerateRegionError("degenerate region")

    @property
    def spatial_measure(self) -> float:
        return len(self.cells) * self.cell_volume

    @property
    def time_measure(self) -> float:
        return float(sum(self.time_weights.values()))

    @property
    def measure(self) -> float:
        return self.spatial_measure * self.time_measure

    @property
    def slices(self) -> list[int]:
        return sorted(self.time_weights)

    def key(self) -> tuple:
        return (self.center, self.radius, self.duration)


# ---------------------------------------------------------------------------
# regions


def ball_cells(grid: Grid, x, r: float, exclude: np.ndarray | None = None) -> np.ndarray:
    """Flat indices of cells whose center lies in the closed ball ``B_r(x)``."""
    d = grid.displacement(grid.centers(), np.atleast_1d(x))
    dist = np.sqrt(np.sum(d**2, axis=1))
    inside = dist <= r * (1 + 1e-12)
    if exclude is not None:
        inside &= ~np.asarray(exclude, dtype=bool).ravel()
    return np.flatnonzero(inside)


def time_weights(grid: Grid, k_top: int, s: float) -> dict[int, float]:
    """Overlap of ``(t_k - s, t_k]`` with each slice interval ``(t_{j-1}, t_j]``."""
    tau = grid.tau
    t = k_top * tau
    lo = t - s
    if lo < -1e-12 * max(1.0, t):
        raise DegenerateRegionError("cylinder extends before the initial time")
    weights: dict[int, float] = {}
    j = k_top
    while j >= 1:
        a, b = (j - 1) * tau, j * tau
        w = min(b, t) - max(a, lo)
        if w <= 0:
            break
        weights[j] = w
        j -= 1
    return weights


def ball(grid: Grid, x, r: float, k: int, exclude: np.ndarray | None = None) -> Region:
    cells = ball_cells(grid, x, r, exclude)
    return Region("ball", (k * grid.tau, *np.atleast_1d(x).tolist()), r, 0.0, cells,
                  {k: 1.0}, grid.cell_volume)


def cylinder(grid: Grid, k_top: int, x, r: float, s: float,
             exclude: np.ndarray | None = None) -> Region:
    """``Q_{s,r}(t_k, x) = (t_k - s, t_k] x B_r(x)`` with fractional slice weights."""
    cells = ball_cells(grid, x, r, exclude)
    tw = time_weights(grid, k_top, s)
    return Region("cylinder", (k_top * grid.tau, *np.atleast_1d(x).tolist()), r, s, cells, tw,
                  grid.cell_volume)


def clip_region(region: Region, grid: Grid) -> Region:
    """Restrict a region to cells that exist in ``grid`` and slices in range."""
    cells = np.asarray(region.cells)
    cells = np.unique(cells[(cells >= 0) & (cells < grid.size)])
    tw = {k: w for k, w in region.time_weights.items() if 0 <= k <= grid.steps and w > 0}
    if len(cells) == 0 or not tw:
        raise DegenerateRegionError("degenerate region: empty after clipping")
    return Region(region.kind, region.center, region.radius, region.duration, cells, tw,
                  grid.cell_volume)


def ball_inside(grid: Grid, x, r: float) -> bool:
    """True if ``B_r(x)`` lies in the domain without clipping (always under periodic bc)."""
    if grid.bc == "periodic":
        return 2 * r < grid.L
    x = np.atleast_1d(x)
    lo = np.asarray(grid.origin)
    return bool(np.all(x - r >= lo - 1e-12) and np.all(x + r <= lo + grid.L + 1e-12))


# ---------------------------------------------------------------------------
# region means


def _region_values(values: np.ndarray, grid: Grid, region: Region):
    """Stack the region's cell values per slice: ``(nslices, ncells, ...)`` and weights."""
    ks = region.slices
    flat = values.reshape(values.shape[0], grid.size, *values.shape[1 + grid.n:])
    vals = flat[ks][:, region.cells]
    w = np.array([region.time_weights[k] for k in ks])
    return vals, w


def region_average(values: np.ndarray, grid: Grid, region: Region) -> np.ndarray:
    """Measure-weighted mean of an array indexed ``(k, *spatial, ...)``."""
    vals, w = _region_values(values, grid, region)
    per_slice = vals.mean(axis=1)
    return np.tensordot(w, per_slice, axes=(0, 0)) / w.sum()


def mean_over(f: SpaceTimeField | GradientField, region: Region) -> np.ndarray:
    """Mean of ``f`` over ``region`` (exact cell sums divided by ``|R|``)."""
    if len(region.cells) == 0 or region.measure <= 0:
        raise DegenerateRegionError("degenerate region")
    return region_average(f.values, f.grid, region)


# ---------------------------------------------------------------------------
# difference operators


@functools.lru_cache(maxsize=64)
def _diff_1d(m: int, h: float, bc: str) -> sp.csr_matrix:
    main = sp.diags([-np.ones(m - 1), np.ones(m - 1)], [-1, 1], shape=(m, m), format="lil")
    if bc == "periodic":
        main[0, m - 1] = -1.0
        main[m - 1, 0] = 1.0
        main = main.tocsr() / (2 * h)
    else:
        main[0, :3] = [-3.0, 4.0, -1.0]
        main[m - 1, m - 3:] = [1.0, -4.0, 3.0]
        main = main.tocsr() / (2 * h)
    return main.tocsr()


@functools.lru_cache(maxsize=32)
def _diff_ops(n: int, m: int, h: float, bc: str) -> tuple[sp.csr_matrix, ...]:
    d1 = _diff_1d(m, h, bc)
    eye = sp.identity(m, format="csr")
    if n == 1:
        return (d1,)
    return (sp.kron(d1, eye, format="csr"), sp.kron(eye, d1, format="csr"))


def diff_operators(grid: Grid) -> tuple[sp.csr_matrix, ...]:
    """Sparse ``(size, size)`` derivative matrices, one per spatial direction."""
    return _diff_ops(grid.n, grid.m, grid.h, grid.bc)


def grad_flat(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Gradient of a flat ``(size, N)`` slice, returned as ``(size, N, n)``."""
    ops = diff_operators(grid)
    return np.stack([D @ u for D in ops], axis=-1)


def div_flat(grid: Grid, F: np.ndarray) -> np.ndarray:
    """Discrete divergence ``-sum_d D_d^T (chi F[..., d])``.

    ``chi`` is :meth:`Grid.flux_rows`, so this is the negative adjoint of
    :func:`grad_flat` for the inner product over cells with centered stencils
    (all cells under periodic bc).
    """
    ops = _transposed_ops(grid.n, grid.m, grid.h, grid.bc)
    chi = grid.flux_rows().reshape((-1,) + (1,) * (F.ndim - 2))
    return -sum(Dt @ (chi * F[..., d]) for d, Dt in enumerate(ops))


@functools.lru_cache(maxsize=32)
def _transposed_ops(n: int, m: int, h: float, bc: str) -> tuple[sp.csr_matrix, ...]:
    return tuple(D.T.tocsr() for D in _diff_ops(n, m, h, bc))


def gradient(f: SpaceTimeField, k: int) -> np.ndarray:
    """Gradient of slice ``k`` with shape ``(*spatial, N, n)``."""
    g = f.grid
    return grad_flat(g, f.flat(k)).reshape(*g.shape, g.N, g.n)


def gradient_field(f: SpaceTimeField) -> GradientField:
    g = f.grid
    vals = np.stack([gradient(f, k) for k in range(g.steps + 1)])
    return GradientField(g, vals)


def divergence_free_projection(grid: Grid, w: np.ndarray) -> np.ndarray:
    """Project ``w`` (shape ``(size, N, n)``) onto fields with vanishing discrete divergence.

    The result satisfies ``div_flat(grid, w)[j] == 0`` at every cell ``j`` the
    solver updates (all cells off :meth:`Grid.fixed_mask`), up to round-off.
    """
    ops = diff_operators(grid)
    free = np.flatnonzero(~grid.fixed_mask())
    chi = sp.diags(grid.flux_rows())
    Dfree = [(chi @ D)[:, free].tocsr() for D in ops]
    lap = sum(Df.T @ Df for Df in Dfree).tocsc()
    out = np.array(w, dtype=float, copy=True)
    rhs = sum(Df.T @ out[..., d] for d, Df in enumerate(Dfree))
    if grid.bc == "dirichlet":
        phi = splu(lap).solve(rhs)
    else:
        # periodic: the Laplacian has a nullspace
        phi = np.stack([lsqr(lap, rhs[:, a], atol=1e-14, btol=1e-14)[0]
                        for a in range(rhs.shape[1])], axis=1)
    for d, Df in enumerate(Dfree):
        out[..., d] -= Df @ phi
    return out


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"PLAPFLD1"


def write_field_csv(f: SpaceTimeField, stream) -> None:
    """CSV with a ``# n,N,m,tau,steps`` header line then one row per slice (row-major)."""
    g = f.grid
    stream.write(f"# n={g.n},N={g.N},m={g.m},L={g.L!r},tau={g.tau!r},steps={g.steps},bc={g.bc}\n")
    for k in range(g.steps + 1):
        stream.write(",".join(repr(float(v)) for v in f.values[k].ravel()))
        stream.write("\n")


def read_field_csv(stream) -> SpaceTimeField:
    header = stream.readline().lstrip("#").strip()
    meta = dict(item.split("=", 1) for item in header.split(","))
    n, N, m = int(meta["n"]), int(meta["N"]), int(meta["m"])
    tau, steps = float(meta["tau"]), int(meta["steps"])
    grid = Grid(n, N, m, float(meta.get("L", 1.0)), tau, tau * steps, meta.get("bc", "periodic"))
    rows = [np.array(line.split(","), dtype=float) for line in stream if line.strip()]
    vals = np.stack(rows).reshape(steps + 1, *grid.shape, N)
    return SpaceTimeField(grid, vals)


def write_field_binary(f: SpaceTimeField) -> bytes:
    """Little-endian: magic, int32 n,N,m,steps, float64 L,tau, uint8 bc, then float64 values."""
    g = f.grid
    head = _MAGIC + struct.pack("<iiiiddB", g.n, g.N, g.m, g.steps, g.L, g.tau,
                                0 if g.bc == "periodic" else 1)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def read_field_binary(data: bytes) -> SpaceTimeField:
    if data[:8] != _MAGIC:
        raise ValueError("not a field file")
    size = struct.calcsize("<iiiiddB")
    n, N, m, steps, L, tau, bc = struct.unpack("<iiiiddB", data[8:8 + size])
    grid = Grid(n, N, m, L, tau, tau * steps, "periodic" if bc == 0 else "dirichlet")
    vals = np.frombuffer(data[8 + size:], dtype="<f8").reshape(steps + 1, *grid.shape, N)
    return SpaceTimeField(grid, vals.copy())


def field_to_csv_text(f: SpaceTimeField) -> str:
    buf = io.StringIO()
    write_field_csv(f, buf)
    return buf.getvalue()
