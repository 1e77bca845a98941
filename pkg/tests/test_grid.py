import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplab.grid import (
    DegenerateRegionError,
    GradientField,
    Grid,
    SpaceTimeField,
    ball,
    ball_cells,
    clip_region,
    cylinder,
    div_flat,
    field_to_csv_text,
    grad_flat,
    gradient,
    mean_over,
    read_field_binary,
    read_field_csv,
    time_weights,
    write_field_binary,
    write_field_csv,
)


def grid1(m=64, bc="periodic", L=1.0, origin=None, steps=4, T=0.04):
    return Grid(n=1, N=1, m=m, L=L, tau=T / steps, T=T, bc=bc, origin=origin)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(n=3, N=1, m=16, L=1, tau=0.1, T=1)
    with pytest.raises(ValueError):
        Grid(n=1, N=1, m=4, L=1, tau=0.1, T=1)
    with pytest.raises(ValueError):
        Grid(n=1, N=1, m=16, L=1, tau=0.3, T=1)
    g = Grid(n=2, N=3, m=16, L=2.0, tau=0.1, T=1.0)
    assert g.h == 0.125 and g.steps == 10 and g.shape == (16, 16) and g.size == 256


def test_gradient_of_constant_is_zero():
    g = grid1()
    f = SpaceTimeField.constant_in_time(g, np.full(g.shape, 3.7))
    assert np.all(gradient(f, 2) == 0)


@pytest.mark.parametrize("bc", ["periodic", "dirichlet"])
def test_gradient_second_order(bc):
    errs = []
    for m in (64, 128, 256):
        g = grid1(m=m, bc=bc)
        f = SpaceTimeField.from_function(g, lambda t, x: np.sin(2 * np.pi * x))
        exact = 2 * np.pi * np.cos(2 * np.pi * g.axis(0))
        errs.append(np.max(np.abs(gradient(f, 0)[:, 0, 0] - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_gradient_linear_2d_dirichlet_exact():
    g = Grid(n=2, N=1, m=16, L=1.0, tau=0.1, T=0.1, bc="dirichlet")
    f = SpaceTimeField.from_function(g, lambda t, x, y: x)
    G = gradient(f, 1)
    assert np.allclose(G[..., 0, 0], 1.0, atol=1e-12)
    assert np.allclose(G[..., 0, 1], 0.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_gradient_is_linear(a, b, seed):
    g = Grid(n=2, N=2, m=8, L=1.0, tau=0.5, T=0.5)
    rng = np.random.default_rng(seed)
    f1, f2 = rng.normal(size=(2, g.size, 2))
    lhs = grad_flat(g, a * f1 + b * f2)
    rhs = a * grad_flat(g, f1) + b * grad_flat(g, f2)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_divergence_of_gradient_sums_to_zero_periodic():
    g = Grid(n=2, N=1, m=16, L=1.0, tau=0.1, T=0.1)
    u = np.random.default_rng(1).normal(size=(g.size, 1))
    assert abs(div_flat(g, grad_flat(g, u)).sum()) < 1e-9


def test_mean_over_examples():
    g = Grid(n=1, N=1, m=2000, L=2.0, tau=0.1, T=0.1, origin=(-1.0,))
    f = SpaceTimeField.from_function(g, lambda t, x: 5.0 + 0 * x)
    reg = ball(g, (0.0,), 0.5, 0)
    assert mean_over(f, reg)[0] == pytest.approx(5.0, abs=1e-14)
    fx = SpaceTimeField.from_function(g, lambda t, x: x)
    assert abs(mean_over(fx, reg)[0]) < 1e-14
    fx2 = SpaceTimeField.from_function(g, lambda t, x: x**2)
    assert mean_over(fx2, reg)[0] == pytest.approx(0.25 / 3, rel=1e-5)


@settings(max_examples=20, deadline=None)
@given(st.floats(-100, 100), st.integers(0, 2**31))
def test_mean_over_affine_invariance(c, seed):
    g = grid1(m=32)
    vals = np.random.default_rng(seed).normal(size=(g.steps + 1, g.m, 1))
    f, fc = SpaceTimeField(g, vals), SpaceTimeField(g, vals + c)
    reg = cylinder(g, g.steps, (0.4,), 0.2, 0.02)
    assert mean_over(fc, reg)[0] == pytest.approx(mean_over(f, reg)[0] + c, abs=1e-9)


def test_small_ball_is_one_cell():
    g = grid1(m=32)
    x = g.axis(0)[7]
    assert ball_cells(g, (x,), g.h / 4).tolist() == [7]


def test_clip_interior_is_identity():
    g = grid1(m=32)
    reg = ball(g, (0.5,), 0.2, 1)
    clipped = clip_region(reg, g)
    assert np.array_equal(np.sort(clipped.cells), np.sort(reg.cells))


def test_periodic_ball_wraps_with_same_count():
    g = Grid(n=2, N=1, m=32, L=1.0, tau=0.1, T=0.1)
    inner = ball_cells(g, (0.5 + g.h / 2, 0.5), 0.2)
    edge = ball_cells(g, (0.0 + g.h / 2, 0.5), 0.2)
    assert len(edge) == len(inner)
    # brute force over cell centers with the minimal-image distance
    X, Y = np.meshgrid(g.axis(0), g.axis(1), indexing="ij")
    dx = (X - g.h / 2 + 0.5) % 1.0 - 0.5
    dy = (Y - 0.5 + 0.5) % 1.0 - 0.5
    brute = np.flatnonzero((dx**2 + dy**2 <= 0.04 + 1e-12).ravel())
    assert np.array_equal(np.sort(edge), brute)


def test_time_weights_cover_duration():
    g = grid1(m=32, steps=10, T=1.0)
    w = time_weights(g, 10, 0.35)
    assert sum(w.values()) == pytest.approx(0.35)
    assert set(w) == {7, 8, 9, 10}
    assert w[7] == pytest.approx(0.05)


def test_degenerate_region_rejected():
    g = grid1(m=32)
    with pytest.raises(DegenerateRegionError):
        cylinder(g, 2, (0.5,), 0.2, 0.0)


def test_gradient_field_shape_checked():
    g = grid1(m=16)
    with pytest.raises(ValueError):
        GradientField(g, np.zeros((g.steps + 1, 16, 1)))
    with pytest.raises(ValueError):
        SpaceTimeField(g, np.full((g.steps + 1, 16, 1), np.nan))


def test_field_csv_and_binary_round_trip():
    g = Grid(n=2, N=2, m=8, L=1.5, tau=0.25, T=0.5, bc="dirichlet")
    f = SpaceTimeField(g, np.random.default_rng(3).normal(size=(3, 8, 8, 2)))
    back = read_field_csv(io.StringIO(field_to_csv_text(f)))
    assert np.array_equal(back.values, f.values) and back.grid.bc == "dirichlet"
    back = read_field_binary(write_field_binary(f))
    assert np.array_equal(back.values, f.values) and back.grid.L == 1.5
    buf = io.StringIO()
    write_field_csv(f, buf)
    assert buf.getvalue().startswith("# n=2,N=2,m=8")
