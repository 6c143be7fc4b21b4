import numpy as np
import pytest
from scipy import integrate

from transportlab.errors import DomainError, ResolutionError
from transportlab.fields import (
    GridFunction,
    GridSpec,
    convolve,
    from_callable,
    grad_fd,
    norm_l1_region,
    snap_to_singular,
)
from transportlab.mollifiers import isotropic_kernel


def grid_1d(lo=-1.0, hi=1.0, n=2001):
    return GridSpec((lo,), (hi,), (n,))


def test_gridspec_invariants():
    g = grid_1d()
    assert g.h == (0.001,)
    with pytest.raises(ValueError):
        GridSpec((0.0,), (0.0,), (100,))
    with pytest.raises(ValueError):
        GridSpec((0.0,), (1.0,), (4,))


def test_gridfunction_rejects_nonfinite():
    g = GridSpec((0.0,), (1.0,), (16,))
    vals = np.zeros(16)
    vals[3] = np.nan
    with pytest.raises(ValueError):
        GridFunction(g, vals)


def test_convolve_constant_machine_precision():
    g = grid_1d()
    f = from_callable(g, lambda p: np.full(p.shape[0], 3.25))
    out = convolve(f, isotropic_kernel(1), eps=0.1)
    assert np.max(np.abs(out.values - 3.25)) < 1e-14


def test_convolve_linear_exact_by_symmetry():
    g = grid_1d()
    f = from_callable(g, lambda p: p[:, 0])
    out = convolve(f, isotropic_kernel(1), eps=0.1)
    x = out.spec.axes()[0]
    assert np.max(np.abs(out.values - x)) < 1e-6


def test_convolve_indicator_half_mass():
    # Oracle: int theta(z) 1_{z<0} dz = 0.5 for any even unit-mass kernel.
    c1 = 1.0 / integrate.quad(lambda z: (1 - z * z) ** 4, -1, 1)[0]
    oracle = integrate.quad(lambda z: c1 * (1 - z * z) ** 4, -1, 0)[0]
    assert abs(oracle - 0.5) < 1e-12

    g = grid_1d(n=2001)  # includes x = 0
    f = from_callable(g, lambda p: (p[:, 0] >= 0).astype(float))
    out = convolve(f, isotropic_kernel(1), eps=0.1)
    i0 = int(np.argmin(np.abs(out.spec.axes()[0])))
    # Quadrature resolves the jump to one stencil weight ~ theta(0)*h/eps.
    tol = 2.0 * (315.0 / 256.0) * g.h[0] / 0.1
    assert abs(out.values[i0] - oracle) < tol


def test_convolve_linearity_and_translation():
    g = grid_1d(n=401)
    rng = np.random.default_rng(7)
    a = GridFunction(g, rng.normal(size=g.size))
    b = GridFunction(g, rng.normal(size=g.size))
    k = isotropic_kernel(1)
    out_sum = convolve(GridFunction(g, 2.0 * a.values - 3.0 * b.values), k, 0.05)
    ref = 2.0 * convolve(a, k, 0.05).values - 3.0 * convolve(b, k, 0.05).values
    np.testing.assert_allclose(out_sum.values, ref, rtol=0, atol=1e-13)

    shift = 5
    shifted = GridFunction(g, np.roll(a.values, shift))
    out = convolve(a, k, 0.05).values
    out_shifted = convolve(shifted, k, 0.05).values
    # Interior overlap shifts exactly with the data.
    assert np.array_equal(out_shifted[shift + 12 :], out[12 : out.size - shift])


def test_convolve_sup_bound():
    g = grid_1d(n=513)
    rng = np.random.default_rng(3)
    f = GridFunction(g, rng.uniform(-2, 2, size=g.size))
    out = convolve(f, isotropic_kernel(1), eps=0.1)
    assert out.sup_norm() <= f.sup_norm() + 1e-14


def test_convolve_preconditions():
    g = grid_1d(n=65)  # h = 1/32
    f = from_callable(g, lambda p: p[:, 0])
    with pytest.raises(ResolutionError):
        convolve(f, isotropic_kernel(1), eps=0.01)
    with pytest.raises(DomainError):
        convolve(f, isotropic_kernel(1), eps=0.95)  # stencil eats the grid


def test_grad_constant_and_affine():
    g = GridSpec((-1.0, -1.0), (1.0, 1.0), (33, 33))
    const = from_callable(g, lambda p: np.full(p.shape[0], 2.0))
    for comp in grad_fd(const):
        assert comp.sup_norm() < 1e-13
    affine = from_callable(g, lambda p: 3.0 * p[:, 0] - 2.0 * p[:, 1])
    gx, gy = grad_fd(affine)
    assert np.max(np.abs(gx.values - 3.0)) < 1e-12
    assert np.max(np.abs(gy.values + 2.0)) < 1e-12


def test_grad_quadratic_interior_exact():
    g = grid_1d(n=201)  # h = 0.01
    f = from_callable(g, lambda p: p[:, 0] ** 2)
    (gx,) = grad_fd(f)
    interior = gx.values[1:-1]
    x = g.axes()[0][1:-1]
    assert np.max(np.abs(interior - 2 * x)) < 1e-12


def test_norm_l1_zero_and_area():
    g = GridSpec((0.0, 0.0), (1.0, 1.0), (65, 65))
    zero = from_callable(g, lambda p: np.zeros(p.shape[0]))
    assert norm_l1_region(zero, (0, 0), (1, 1)) == 0.0
    one = from_callable(g, lambda p: np.ones(p.shape[0]))
    assert abs(norm_l1_region(one, (0, 0), (1, 1)) - 1.0) < g.h[0]


def test_norm_l1_sine_closed_form():
    # Oracle: int_0^1 |sin(pi x)| dx = 2/pi.
    g = grid_1d(0.0, 1.0, 1001)
    f = from_callable(g, lambda p: np.sin(np.pi * p[:, 0]))
    val = norm_l1_region(f, (0.0,), (1.0,))
    assert abs(val - 2.0 / np.pi) < 1e-5


def test_norm_l1_monotone_and_subadditive():
    g = grid_1d(n=257)
    rng = np.random.default_rng(11)
    f = GridFunction(g, rng.normal(size=g.size))
    h = GridFunction(g, rng.normal(size=g.size))
    small = norm_l1_region(f, (-0.3,), (0.3,))
    big = norm_l1_region(f, (-0.8,), (0.8,))
    assert small <= big + 1e-14
    s = GridFunction(g, f.values + h.values)
    assert norm_l1_region(s, (-1,), (1,)) <= (
        norm_l1_region(f, (-1,), (1,)) + norm_l1_region(h, (-1,), (1,)) + 1e-12
    )
    with pytest.raises(DomainError):
        norm_l1_region(f, (-2.0,), (0.0,))


def test_snap_to_singular_offsets_nodes():
    spec = snap_to_singular((-1.0,), (1.0,), (201,), {0: [0.0]})
    x = spec.axes()[0]
    h = spec.h[0]
    assert np.min(np.abs(x)) > 0.4 * h


def test_csv_round_trip(tmp_path):
    g = GridSpec((-1.0,), (1.0,), (17,))
    f = GridFunction(g, np.linspace(-3, 3, 17) ** 3 / 7.0)
    path = tmp_path / "f.csv"
    f.to_csv(path)
    back = GridFunction.from_csv(path)
    assert back.spec == g
    assert np.array_equal(back.values, f.values)
