import math

import numpy as np
import pytest
from scipy import integrate, special

from transportlab.drifts import (
    alpha_rate,
    catalog,
    catalog_names,
    prodi_serrin_norm,
    split_shear,
    split_sqrt,
    split_trivial,
)
from transportlab.errors import ConfigurationError, UnknownDriftError


def test_catalog_names_and_lookup_error():
    assert set(catalog_names()) == {"constant", "smooth_sin", "sign_1d", "sqrt_1d", "shear_flow"}
    with pytest.raises(UnknownDriftError):
        catalog("vortex")


def test_sign_bv_atom():
    b = catalog("sign_1d")
    assert b.bv.total_box((-1.0,), (1.0,)) == 2.0
    assert b.bv.singular_box((0.5,), (1.0,)) == 0.0
    assert b.bv.ac_box((-1.0,), (1.0,)) == 0.0


def test_shear_eval_formula():
    b = catalog("shear_flow")
    v = b.eval(np.array([3.0, 4.0]))
    np.testing.assert_allclose(v, [1.0, 4.0])
    v = b.eval(np.array([[3.0, -4.0]]))[0]
    np.testing.assert_allclose(v, [-1.0, -4.0])
    assert np.allclose(b.eval(np.array([5.0, 0.0])), [0.0, 0.0])  # sign(0) = 0
    b_plus = catalog("shear_flow", sign_zero=1.0)
    assert np.allclose(b_plus.eval(np.array([5.0, 0.0])), [1.0, 0.0])


def test_smooth_sin_bv_closed_form_vs_quadrature():
    b = catalog("smooth_sin")
    closed = b.bv.ac_box((0.0,), (math.pi,))
    oracle = integrate.quad(lambda x: abs(math.cos(x)), 0, math.pi)[0]
    assert abs(closed - 2.0) < 1e-12
    assert abs(closed - oracle) < 1e-9
    # an interval crossing several half-periods
    closed = b.bv.ac_box((-2.0,), (7.5,))
    oracle = integrate.quad(lambda x: abs(math.cos(x)), -2.0, 7.5, limit=100)[0]
    assert abs(closed - oracle) < 1e-8


def test_bv_additivity_disjoint_boxes():
    b = catalog("shear_flow")
    q1 = ((-1.0, -2.0), (1.0, -0.5))
    q2 = ((-1.0, -0.5), (1.0, 3.0))
    whole = ((-1.0, -2.0), (1.0, 3.0))
    assert abs(
        b.bv.total_box(*q1) + b.bv.total_box(*q2) - b.bv.total_box(*whole)
    ) < 1e-12


def test_divergence_matches_finite_differences_off_singular_set():
    rng = np.random.default_rng(1)
    for name in ("smooth_sin", "sqrt_1d", "shear_flow"):
        b = catalog(name)
        pts = rng.uniform(0.3, 2.0, size=(50, b.dim)) * rng.choice([-1, 1], size=(50, b.dim))
        h = 1e-5
        div_fd = np.zeros(50)
        for axis in range(b.dim):
            e = np.zeros(b.dim)
            e[axis] = h
            div_fd += (b.eval(pts + e)[:, axis] - b.eval(pts - e)[:, axis]) / (2 * h)
        np.testing.assert_allclose(div_fd, b.div(pts), rtol=1e-4, atol=1e-6)


def test_shear_split_formulas():
    split = split_shear()
    b1, b2 = split.b1, split.b2
    np.testing.assert_allclose(b1.eval(np.array([0.0, 9.0])), [1.0, 2.0])
    np.testing.assert_allclose(b2.eval(np.array([0.0, 0.5])), [0.0, 0.0])
    np.testing.assert_allclose(b2.eval(np.array([0.0, 4.0])), [0.0, 2.0])


def test_split_consistency_random_points():
    split = split_shear()
    rng = np.random.default_rng(123)
    pts = rng.uniform(-30, 30, size=(10000, 2))
    pts = pts[np.abs(pts[:, 1]) > 1e-9]
    total = split.b1.eval(pts) + split.b2.eval(pts)
    np.testing.assert_allclose(total, split.parent.eval(pts), rtol=0, atol=1e-12)


def test_split_norms_upper_bound_sampled_suprema():
    split = split_shear()
    ys = np.concatenate([np.linspace(-1e6, 1e6, 400001), np.linspace(-2, 2, 40001)])
    pts = np.stack([np.zeros_like(ys), ys], axis=-1)
    b1v = np.linalg.norm(split.b1.eval(pts), axis=-1)
    assert b1v.max() <= split.norms["b1_sup"] + 1e-12
    assert abs(b1v.max() - math.sqrt(5.0)) < 1e-6
    growth = np.linalg.norm(split.b2.eval(pts), axis=-1) / (1 + np.abs(ys))
    assert growth.max() <= split.norms["b2_growth_sup"] + 1e-12
    assert abs(split.norms["b2_growth_sup"] - (math.sqrt(2) - 1)) < 1e-12
    dv = split.b2.div(pts)
    assert np.nanmax(dv) <= split.norms["div_b2_sup"] + 1e-12


def test_alpha_rate_closed_forms():
    c = catalog("constant", c=(1.5,))
    assert abs(alpha_rate(split_trivial(c, 1.5)) - 1.5**2) < 1e-15
    s = catalog("smooth_sin")
    assert abs(alpha_rate(split_trivial(s, 1.0)) - 1.0) < 1e-15
    shear = split_shear()
    expect = 5.0 + (math.sqrt(2) - 1) ** 2 + 1.0
    assert abs(alpha_rate(shear) - expect) < 1e-12
    bad = split_trivial(c, 1.5)
    object.__setattr__(bad, "norms", {})
    with pytest.raises(ConfigurationError):
        alpha_rate(bad)


def test_sqrt_split_norms_sampled():
    split = split_sqrt()
    xs = np.linspace(-1e5, 1e5, 200001)[:, None]
    growth = np.abs(split.b2.eval(xs)[:, 0]) / (1 + np.abs(xs[:, 0]))
    assert growth.max() <= split.norms["b2_growth_sup"] + 1e-12
    total = split.b1.eval(xs) + split.b2.eval(xs)
    np.testing.assert_allclose(total, split.parent.eval(xs), atol=1e-12)


def test_prodi_serrin_condition_arithmetic():
    b = catalog("shear_flow")
    _, ok = prodi_serrin_norm(b, 4.0, 4.0, ((-1, -1), (1, 1)), horizon=1.0, cells=100)
    assert ok
    _, ok = prodi_serrin_norm(b, 2.0, 2.0, ((-1, -1), (1, 1)), horizon=1.0, cells=100)
    assert not ok


def test_prodi_serrin_sign_norm_closed_form():
    b = catalog("sign_1d")
    norm, _ = prodi_serrin_norm(b, 3.0, 3.0, ((-1.0,), (1.0,)), horizon=1.0)
    assert abs(norm - 2.0 ** (1.0 / 3.0)) < 1e-12
    with pytest.raises(ValueError):
        prodi_serrin_norm(b, 1.0, 3.0, ((-1.0,), (1.0,)), horizon=1.0)


def test_shear_tail_weighted_closed_form():
    # Independent derivation: line atoms give 4/(1+R) at N=2; the ac part
    # separates in polar coordinates into 2*Beta(1/4,1/2) times a radial
    # integral with antiderivative arctan.
    b = catalog("shear_flow")
    for R in (0.5, 1.0, 5.0):
        line = 4.0 / (1.0 + R)
        ang = 2.0 * special.beta(0.25, 0.5)
        rad = math.pi / 2 - math.atan(math.sqrt(R)) + math.sqrt(R) / (1 + R)
        oracle = line + ang * rad
        assert abs(b.bv.tail_weighted(2.0, R) - oracle) < 1e-8
    assert abs(b.bv.tail_weighted(2.0, 1.0) - 15.481551858437982) < 1e-9
