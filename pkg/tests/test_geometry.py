import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplab.geometry import (
    ScaledCylinder,
    StartingCubeError,
    build_family,
    check_family,
    classify,
    default_ladder,
    first_intrinsic_radius,
    s_of_r,
    s_tilde,
    standard_cube_lambda,
    starting_cube,
)
from plaplab.grid import GradientField, Grid

T = 1.0


def line_grid(m=64, steps=64):
    return Grid(n=1, N=1, m=m, L=1.0, tau=T / steps, T=T)


def const_field(grid, lam0):
    shape = (grid.steps + 1, *grid.shape, grid.N, grid.n)
    vals = np.zeros(shape)
    vals[..., 0, 0] = lam0
    return GradientField(grid, vals)


def piecewise_field(grid, rng, pieces=8):
    vals = rng.uniform(0.0, 3.0, size=(grid.steps + 1, pieces))
    vals = np.repeat(vals, grid.m // pieces, axis=1)
    return GradientField(grid, vals[..., None, None])


CENTER = (64, (0.5,))


def test_s_tilde_zero_field_is_S():
    g = line_grid()
    assert s_tilde(0.2, CENTER, 0.7, const_field(g, 0.0), 3.0) == 0.7


def test_s_tilde_constant_closed_form():
    g = line_grid()
    assert s_tilde(0.25, CENTER, 1.0, const_field(g, 2.0), 4.0) == pytest.approx(1 / 64, rel=1e-7)
    for lam0, p, r in ((0.5, 3.0, 0.2), (3.0, 3.5, 0.1), (1.5, 4.0, 0.25)):
        expected = min(T, lam0 ** (2 - p) * r**2)
        assert s_tilde(r, CENTER, T, const_field(g, lam0), p) == pytest.approx(expected, rel=1e-7)


def test_s_tilde_errors():
    g = line_grid()
    with pytest.raises(ValueError):
        s_tilde(0.2, CENTER, 1.0, const_field(g, 1.0), 2.0)
    with pytest.raises(ValueError):
        s_tilde(0.0, CENTER, 1.0, const_field(g, 1.0), 3.0)


def test_s_of_r_examples():
    radii = default_ladder(0.25, 1 / 64)
    st_const = radii**2 * 0.3
    assert np.allclose(s_of_r(radii, st_const, 1.0), st_const)
    S = 0.5
    assert np.allclose(s_of_r(radii, np.full_like(radii, S), 0.7), (radii / 0.25) ** 0.7 * S)
    rng = np.random.default_rng(0)
    anyst = rng.uniform(0.01, 1, size=len(radii))
    assert np.all(s_of_r(radii, anyst, 1.3) <= anyst)
    with pytest.raises(ValueError):
        s_of_r(radii, anyst, 2.0)


def test_ladder_bottom_respects_min_cells():
    radii = default_ladder(0.25, 1 / 64)
    assert radii[-1] >= 4 / 64 and radii[-1] * 2**-0.5 < 4 / 64
    assert np.allclose(radii[1:] / radii[:-1], 2**-0.5)


def test_constant_field_family_is_intrinsic_with_constant_lambda():
    g = line_grid()
    G = const_field(g, 2.0)
    fam = build_family(CENTER, 0.25, T, 1.0, G, 4.0)
    assert np.allclose(fam.lam, 2.0, rtol=1e-6)
    assert all(s == "intrinsic" for s in fam.statuses(1.1))
    assert first_intrinsic_radius(fam, G) == pytest.approx(fam.radii[-1])


def test_zero_field_family_lambda_formula():
    g = line_grid()
    G = const_field(g, 0.0)
    p, b, R, S = 3.0, 0.5, 0.25, 0.6
    fam = build_family(CENTER, R, S, b, G, p)
    expected = (fam.radii ** (2 - b) * R**b / S) ** (1 / (p - 2))
    assert np.allclose(fam.lam, expected, rtol=1e-12)
    assert first_intrinsic_radius(fam, G) is None


def test_constant_field_lambda_scales_linearly():
    g = line_grid()
    lam1 = build_family(CENTER, 0.25, T, 1.0, const_field(g, 1.5), 3.0).lam
    lam3 = build_family(CENTER, 0.25, T, 1.0, const_field(g, 4.5), 3.0).lam
    assert np.allclose(lam3, 3 * lam1, rtol=1e-6)


def test_p2_family_is_standard():
    g = line_grid()
    fam = build_family(CENTER, 0.25, T, 1.0, const_field(g, 2.0), 2.0)
    assert np.all(fam.lam == 1.0) and np.allclose(fam.s, fam.radii**2)


def test_build_family_rejects_bad_b():
    g = line_grid()
    with pytest.raises(ValueError):
        build_family(CENTER, 0.25, T, 2.5, const_field(g, 1.0), 3.0)


def test_classify_examples():
    g = line_grid()
    G = const_field(g, 2.0)
    fam = build_family(CENTER, 0.25, T, 1.0, G, 3.0)
    Q = fam.cylinder(1)
    assert classify(Q, G, K=1.05).status == "intrinsic"
    assert classify(Q, const_field(g, 0.0)).status == "sub"
    assert classify(Q, const_field(g, 20.0), K=2.0).status == "super"


def test_first_intrinsic_radius_with_quiet_core():
    g = line_grid(m=128, steps=64)
    R = 0.25
    x = g.axis(0)
    vals = np.where(np.abs(x - 0.5) < R / 4, 0.0, 2.0)
    G = GradientField(g, np.broadcast_to(vals[None, :, None, None], (g.steps + 1, g.m, 1, 1)))
    fam = build_family(CENTER, R, T, 1.0, G, 3.0)
    r = first_intrinsic_radius(fam, G)
    assert r is not None and r >= R / 4
    brute = [fam.radii[j] for j, q in enumerate(fam.ratios) if 1 / 1.1 <= q <= 1.1]
    assert r == pytest.approx(min(brute))


def test_starting_cube_constant_field_2d():
    g = Grid(n=2, N=1, m=32, L=1.0, tau=1 / 32, T=1.0)
    lam0, p = 1.5, 4.0
    G = const_field(g, lam0)
    outer = ScaledCylinder.from_lambda(32, (0.5, 0.5), 0.25, lam0, p)
    cube = starting_cube((32, (0.5, 0.5)), outer, G, p)
    assert cube.lam == pytest.approx(4 * lam0)
    assert classify(cube, G).status == "sub"


def test_starting_cube_zero_field_standard():
    g = line_grid()
    G = const_field(g, 0.0)
    assert standard_cube_lambda(G, 64, (0.5,), 0.25, 3.0) == 1.0
    cube = starting_cube((64, (0.55,)), (64, (0.5,), 0.25), G, 3.0)
    assert classify(cube, G).status == "sub"
    with pytest.raises(StartingCubeError):
        starting_cube((64, (0.9,)), (64, (0.5,), 0.25), G, 3.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([3.0, 4.0]), st.sampled_from([0.5, 1.0, 1.5]))
def test_starting_cube_postcondition(seed, p, b):
    g = line_grid()
    G = piecewise_field(g, np.random.default_rng(seed))
    try:
        cube = starting_cube((64, (0.5,)), (64, (0.5,), 0.25), G, p)
    except StartingCubeError:
        return
    assert classify(cube, G).status in ("sub", "intrinsic")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([3.0, 4.0]), st.sampled_from([0.5, 1.0, 1.5]))
def test_family_items_on_random_fields(seed, p, b):
    g = line_grid()
    G = piecewise_field(g, np.random.default_rng(seed))
    fam = build_family(CENTER, 0.25, 0.5, b, G, p)
    chk = check_family(fam, G)
    for item in ("item1", "item2", "item3", "item7_lower", "item8", "s_le_s_tilde"):
        assert chk[item], item
    assert np.isfinite(chk["c7"])
