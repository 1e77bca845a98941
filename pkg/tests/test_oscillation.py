import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplab.grid import Grid, ball, cylinder
from plaplab.oscillation import (
    ONE,
    Box,
    Weight,
    appendix_validators,
    best_linear,
    blo_seminorm,
    bmo_par,
    bochner_bmo,
    hammer_ratios,
    iterated_means_inequality,
    john_nirenberg_check,
    linear_residual,
    mean_dist,
    mean_osc,
    means_inequality,
    osc,
    small_mean_inequality,
    v_map,
    zygmund_seminorm,
)


def sym_grid(m=256, slices=2, shift=0.0, bc="dirichlet"):
    """Box [-1, 1) (shifted by ``shift``) with ``slices`` time levels."""
    return Grid(n=1, N=1, m=m, L=2.0, tau=1.0, T=float(slices - 1), bc=bc, origin=(-1.0 + shift,))


def tile(g, f):
    return np.broadcast_to(np.asarray(f, float)[None, :, None], (g.steps + 1, g.m, 1)).copy()


# ---------------------------------------------------------------------------
# pointwise maps


def test_v_map_examples():
    Q = np.random.default_rng(0).normal(size=(10, 2, 3))
    assert np.array_equal(v_map(Q, 2.0), Q)
    assert np.allclose(v_map(np.array([[[2.0, 0.0]]]), 4.0), [[[4.0, 0.0]]])


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_v_map_square_norm_is_p_power(p):
    Q = np.random.default_rng(int(p)).normal(size=(10_000, 2, 2))
    lhs = np.sum(v_map(Q, p) ** 2, axis=(-2, -1))
    rhs = np.sqrt(np.sum(Q**2, axis=(-2, -1))) ** p
    assert np.allclose(lhs, rhs, rtol=1e-12)


# ---------------------------------------------------------------------------
# region statistics


def test_mean_osc_examples():
    g = sym_grid(m=1000)
    reg = ball(g, (0.0,), 0.5, 0)
    assert mean_osc(tile(g, np.full(g.m, 3.0)), g, reg) == 0.0
    assert mean_osc(tile(g, g.axis(0)), g, reg) == pytest.approx(0.25, rel=1e-3)
    with pytest.raises(ValueError):
        mean_osc(tile(g, g.axis(0)), g, reg, q=0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(-5, 5), st.sampled_from([1.0, 2.0, 3.0]))
def test_best_constant_property(seed, c, q):
    g = sym_grid(m=32)
    f = np.random.default_rng(seed).normal(size=(g.steps + 1, g.m, 1))
    reg = ball(g, (0.0,), 0.5, 1)
    assert mean_osc(f, g, reg, q) <= 2 * mean_dist(f, g, reg, [c], q) + 1e-12


def test_osc_of_identity():
    g = sym_grid()
    reg = ball(g, (0.0,), 0.5, 0)
    assert osc(tile(g, g.axis(0)), g, reg) == pytest.approx(2 * 0.5 - g.h, abs=1e-12)


# ---------------------------------------------------------------------------
# BMO scans


def test_bmo_of_constant_is_zero():
    g = sym_grid(m=64, slices=5)
    assert bmo_par(tile(g, np.full(g.m, 2.0)), g).value == 0.0


def test_bmo_affine_attained_at_largest_radius():
    g = sym_grid(m=128, slices=3, bc="dirichlet")
    slope = 1.7
    f = tile(g, slope * g.axis(0))
    radii = [0.4, 0.2, 0.1]
    sv = bmo_par(f, g, Box.whole(g), radii=radii)
    assert sv.witness.radius == 0.4
    xs = g.axis(0)[sv.witness.cells]
    assert sv.value == pytest.approx(slope * np.mean(np.abs(xs - xs.mean())), rel=1e-12)
    assert sv.value == pytest.approx(slope * 0.4 / 2, rel=0.05)
    # with omega(r) = r the per-radius values agree
    per = [bmo_par(f, g, Box.whole(g), Weight("power", 1.0), radii=[r]).value for r in radii]
    assert max(per) / min(per) < 1.02


def test_bochner_examples():
    g = sym_grid(m=128, slices=4, bc="periodic")
    t = np.arange(g.steps + 1)[:, None, None]
    drift = np.broadcast_to(np.sin(t), (g.steps + 1, g.m, 1))
    assert bochner_bmo(drift, g).value < 1e-12
    x0 = -1.0 + 64 * g.h  # a cell face
    lg = tile(g, np.log(np.abs(2 * np.sin(np.pi * (g.axis(0) - x0) / g.L))))
    vals = [bochner_bmo(A * lg, g).value for A in (1.0, 2.0, 4.0)]
    assert vals[1] == pytest.approx(2 * vals[0], rel=1e-12)
    assert vals[2] == pytest.approx(4 * vals[0], rel=1e-12)
    assert bochner_bmo(lg + 3 * drift, g).value == pytest.approx(vals[0], rel=1e-12)


# ---------------------------------------------------------------------------
# BLO and best affine maps


def test_best_linear_examples():
    g = sym_grid()
    r = 0.5
    reg = ball(g, (0.0,), r, 0)
    x = g.axis(0)
    a, B, _ = best_linear(tile(g, 3 * x - 2), g, reg)
    assert linear_residual(tile(g, 3 * x - 2), g, reg) < 1e-12
    f = tile(g, x**2)
    assert linear_residual(f, g, reg) == pytest.approx(2 * r**2 / (3 * math.sqrt(5)), rel=2e-3)
    a1, B1, _ = best_linear(f, g, reg)
    a2, B2, _ = best_linear(f + tile(g, 0.5 * x + 1), g, reg)
    assert np.allclose(B2 - B1, 0.5) and np.allclose(a2 - a1, 0.5 * np.mean(x[reg.cells]) + 1)


def test_blo_closed_forms():
    g = sym_grid()
    x = g.axis(0)
    assert blo_seminorm(tile(g, 2 * x + 1), g, slices=[0]).value < 1e-10
    sv = blo_seminorm(tile(g, x**2), g, slices=[0])
    assert sv.value == pytest.approx(2 * sv.witness.radius / (3 * math.sqrt(5)), rel=0.02)
    assert sv.witness.radius == pytest.approx(0.5)


def test_blo_of_abs_is_refinement_stable():
    vals = []
    for m in (64, 128, 256):
        g = sym_grid(m=m)
        vals.append(blo_seminorm(tile(g, np.abs(g.axis(0))), g, slices=[0]).value)
    assert min(vals) > 0.05 and max(vals) / min(vals) < 1.5


def test_witness_reproduces_value():
    g = sym_grid(m=64, slices=4)
    f = np.random.default_rng(2).normal(size=(g.steps + 1, g.m, 1))
    sv = bmo_par(f, g)
    w = sv.witness
    assert abs(mean_osc(f, g, w) - sv.value) <= 1e-12
    sv = blo_seminorm(f, g, slices=[1, 2])
    assert abs(linear_residual(f, g, sv.witness) / sv.witness.radius - sv.value) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_homogeneity_and_invariance(seed, A, c, slope):
    g = sym_grid(m=32, slices=3)
    f = np.random.default_rng(seed).normal(size=(g.steps + 1, g.m, 1))
    aff = tile(g, slope * g.axis(0) + c)
    for fn in (bmo_par, bochner_bmo):
        base = fn(f, g).value
        assert fn(A * f, g).value == pytest.approx(A * base, rel=1e-9)
        assert fn(f + c, g).value == pytest.approx(base, rel=1e-9)
    base = blo_seminorm(f, g, slices=[1]).value
    assert blo_seminorm(A * f, g, slices=[1]).value == pytest.approx(A * base, rel=1e-9)
    assert blo_seminorm(f + aff, g, slices=[1]).value == pytest.approx(base, rel=1e-7)
    z = zygmund_seminorm(f, g, 1.0, k=1)["second_difference"]
    assert zygmund_seminorm(A * f, g, 1.0, k=1)["second_difference"] == pytest.approx(A * z, rel=1e-9)
    assert zygmund_seminorm(f + aff, g, 1.0, k=1)["second_difference"] == pytest.approx(z, rel=1e-7)


def test_monotone_domain():
    g = sym_grid(m=64, slices=4)
    f = np.random.default_rng(9).normal(size=(g.steps + 1, g.m, 1))
    radii = [0.2, 0.1]
    full = bmo_par(f, g, Box.whole(g), radii=radii).value
    sub = bmo_par(f, g, Box((-0.5,), (0.5,), 0, g.steps), radii=radii).value
    assert sub <= full


# ---------------------------------------------------------------------------
# Zygmund


def test_zygmund_examples():
    m = 256
    h = 2.0 / m
    g = sym_grid(m=m, shift=-h / 2)  # puts x = 0 on a cell center
    x = g.axis(0)
    assert np.any(np.abs(x) < 1e-12)
    assert zygmund_seminorm(tile(g, 3 * x + 1), g, 1.0)["second_difference"] < 1e-9
    zabs = zygmund_seminorm(tile(g, np.abs(x)), g, 1.0)
    assert zabs["second_difference"] == pytest.approx(2.0, rel=1e-9)
    zsq = zygmund_seminorm(tile(g, x**2), g, 1.0)
    hmax = ((m - 1) // 2) * h
    assert zsq["second_difference"] == pytest.approx(2 * hmax, rel=1e-9)
    with pytest.raises(ValueError):
        zygmund_seminorm(tile(g, x), g, 2.5)


# ---------------------------------------------------------------------------
# ellipticity


def test_hammer_examples():
    rng = np.random.default_rng(0)
    P, Q = rng.normal(size=(2, 2000, 2, 2))
    r2 = hammer_ratios(P, Q, 2.0)
    assert r2["ratio_min"] == pytest.approx(1.0, abs=1e-12)
    assert r2["ratio_max"] == pytest.approx(1.0, abs=1e-12)
    for p in (3.0, 4.0):
        r0 = hammer_ratios(np.zeros_like(Q), Q, p)
        assert r0["ratio_min"] == pytest.approx(1.0, abs=1e-12)
        assert r0["ratio_max"] == pytest.approx(1.0, abs=1e-12)
        rp = hammer_ratios(P, Q, p, G=rng.normal(size=Q.shape))
        assert rp["ratio_max"] / rp["ratio_min"] <= 100
        assert np.isfinite(rp["nervig_c"])
        assert all(np.isfinite(v) for k, v in rp.items() if k.startswith("hammer2"))


# ---------------------------------------------------------------------------
# John-Nirenberg and appendix inequalities


def test_john_nirenberg_ratio():
    g = sym_grid(m=128, bc="periodic")
    x0 = -1.0 + 64 * g.h
    f = tile(g, np.log(np.abs(2 * np.sin(np.pi * (g.axis(0) - x0) / g.L))))
    reg = ball(g, (g.axis(0)[60],), 0.25, 0)
    r1 = john_nirenberg_check(f, g, reg, 1.0)
    r2 = john_nirenberg_check(f, g, reg, 2.0)
    assert r1["ratio"] <= 1 + 1e-12
    assert r1["ratio"] <= r2["ratio"] < 10
    r4 = john_nirenberg_check(f, g, reg, 4.0)
    assert john_nirenberg_check(2 * f, g, reg, 4.0)["ratio"] == pytest.approx(r4["ratio"], rel=0.2)
    flat = john_nirenberg_check(np.ones_like(f), g, reg, 2.0)
    assert flat["degenerate"] and math.isnan(flat["ratio"])
    assert john_nirenberg_check(tile(g, g.axis(0)), g, reg, 1.0)["ratio"] <= 2
    with pytest.raises(ValueError):
        john_nirenberg_check(f, g, reg, 9.0)


def test_appendix_on_constant_and_identity():
    f = np.full(16, 2.5)
    w = np.ones(16)
    inner, outer = np.arange(4, 12), np.arange(16)
    r = means_inequality(f, w, inner, outer, 1.0)
    assert r["holds"] and r["lhs"] == 0
    assert iterated_means_inequality(f, w, [outer, inner, np.arange(6, 10)], 2.0)["lhs"] == 0
    assert small_mean_inequality(f - 2.5, w, inner, outer, 1.0, 0.5)["holds"]
    x = np.linspace(-1, 1, 16)
    r = means_inequality(x, w, inner, outer, 1.0)
    assert r["lhs"] < 1e-15 and r["holds"]


def test_appendix_validators_no_violations():
    rep = appendix_validators(cases=1500, seed=11)
    for name, row in rep.items():
        assert row["violations"] == 0, name
        assert row["cases"] > 0


# ---------------------------------------------------------------------------
# weights


def test_weight_behaviour():
    w = Weight("power", 0.5)
    assert w(4.0) == pytest.approx(2.0)
    assert w.power(2.0)(4.0) == pytest.approx(4.0)
    assert ONE.power(3.0) is ONE
    radii = np.geomspace(1e-3, 1, 20)
    assert w.almost_increasing_constant(radii) == pytest.approx(1.0)
    assert ONE.satisfies_decay(3.0, radii, [0.5, 0.25])
    # r^gamma loses a factor sigma^-gamma, more than sigma^(-gamma/p) allows
    assert not w.satisfies_decay(3.0, radii, [0.5, 0.25])
    tab = Weight("table", table=((0.01, 1.0), (1.0, 10.0)))
    assert tab(0.1) == pytest.approx(10**0.5)


def test_cylinder_mean_osc_time_weighted():
    g = Grid(n=1, N=1, m=32, L=1.0, tau=0.1, T=0.3)
    f = np.zeros((4, 32, 1))
    f[3] = 1.0
    reg = cylinder(g, 3, (0.5,), 0.2, 0.2)
    # slices 2 and 3 each carry half the weight
    assert mean_osc(f, g, reg) == pytest.approx(0.5)
