import math

import numpy as np
import pytest

from transportlab.drifts import catalog
from transportlab.expectation_mc import (
    feynman_kac,
    feynman_kac_points,
    mc_vs_fd,
    selection_invariance,
)
from transportlab.fields import GridSpec, from_callable
from transportlab.parabolic import heat_exact
from transportlab.transport_solutions import (
    InitialDatum,
    constant_datum,
    gaussian_bump,
    identity_renorm,
    sign_datum,
    square_renorm,
)


def test_constant_datum_exact():
    b = catalog("smooth_sin")
    est = feynman_kac(b, constant_datum(0.7), identity_renorm(), t=0.2,
                      x=[0.1], n_paths=200, dt=1e-2, seed=5)
    assert est.mean == 0.7
    assert est.stderr == 0.0
    assert est.reliable


def test_square_of_sign_is_one():
    b = catalog("sign_1d")
    est = feynman_kac(b, sign_datum(), square_renorm(), t=0.2,
                      x=[0.3], n_paths=500, dt=1e-2, seed=6)
    assert est.mean == 1.0
    assert est.stderr == 0.0


def test_heat_oracle_zero_drift():
    b = catalog("constant", c=(0.0,))
    u0 = gaussian_bump(center=0.0, width=0.3)
    spec = GridSpec((-3.0,), (3.0,), (769,))
    ref = heat_exact(from_callable(spec, u0), 0.25)
    x0 = 0.25
    idx = int(np.argmin(np.abs(spec.axes()[0] - x0)))
    x0 = float(spec.axes()[0][idx])
    est = feynman_kac(b, u0, identity_renorm(), t=0.25, x=[x0],
                      n_paths=40000, dt=1e-3, seed=11)
    assert abs(est.mean - ref.values[idx]) <= 3.0 * est.stderr + 1e-4


def test_bounds_and_seed_determinism():
    b = catalog("shear_flow")
    u0 = InitialDatum(fn=lambda p: np.tanh(p[..., 1]), sup_norm=1.0)
    beta = square_renorm()
    pts = [[0.0, 0.1], [0.2, -0.3]]
    a = feynman_kac_points(b, u0, beta, 0.2, pts, 500, 1e-2, seed=13)
    bb = feynman_kac_points(b, u0, beta, 0.2, pts, 500, 1e-2, seed=13)
    for e1, e2 in zip(a, bb):
        assert e1.mean == e2.mean and e1.stderr == e2.stderr
        assert 0.0 <= e1.mean <= 1.0  # [inf beta(u0), sup beta(u0)]
        assert e1.fingerprint == e2.fingerprint


def test_clt_stderr_scaling():
    b = catalog("smooth_sin")
    u0 = gaussian_bump(center=0.0, width=0.4)
    beta = identity_renorm()
    small = [feynman_kac(b, u0, beta, 0.2, [0.0], 1000, 1e-2, seed=s).stderr
             for s in (1, 2, 3, 4, 5)]
    big = [feynman_kac(b, u0, beta, 0.2, [0.0], 4000, 1e-2, seed=s).stderr
           for s in (1, 2, 3, 4, 5)]
    ratio = np.mean(small) / np.mean(big)
    assert abs(ratio - 2.0) <= 0.4


def test_renormalization_consistency_pathwise():
    b = catalog("shear_flow")
    u0 = InitialDatum(fn=lambda p: (p[..., 1] > 0).astype(float), sup_norm=1.0)
    beta = square_renorm()
    composed = InitialDatum(fn=lambda p: beta.beta(u0(p)), sup_norm=1.0)
    e1 = feynman_kac(b, u0, beta, 0.3, [0.1, 0.0], 2000, 1e-2, seed=21)
    e2 = feynman_kac(b, composed, identity_renorm(), 0.3, [0.1, 0.0], 2000, 1e-2, seed=21)
    assert e1.mean == e2.mean
    assert e1.stderr == e2.stderr


def test_minimum_paths_enforced():
    b = catalog("smooth_sin")
    with pytest.raises(ValueError):
        feynman_kac(b, constant_datum(1.0), identity_renorm(), 0.1, [0.0],
                    n_paths=50, dt=1e-2, seed=1)


def test_escape_flagging():
    b = catalog("constant", c=(10.0,))
    est = feynman_kac(b, constant_datum(1.0), identity_renorm(), 1.0, [0.0],
                      n_paths=200, dt=1e-2, seed=3, bounding_box=0.5)
    assert est.escaped_frac > 0.5
    assert not est.reliable


def test_selection_invariance_small():
    u0 = InitialDatum(fn=lambda p: (p[..., 1] > 0).astype(float), sup_norm=1.0)
    rep = selection_invariance(
        u0, identity_renorm(), t=0.3, line_xs=[-0.2, 0.4],
        n_paths=4000, dt=2e-3, seed=29,
    )
    assert rep.passed
    assert rep.deterministic_gap == 1.0
    # symmetry: both means near 1/2
    assert np.all(np.abs(rep.means - 0.5) < 0.05)
    text = rep.csv_text()
    assert text.splitlines()[1].startswith("x,mean_0")


def test_mc_vs_fd_zero_drift_1d():
    b = catalog("constant", c=(0.0,))
    u0 = gaussian_bump(center=0.0, width=0.3)
    rep = mc_vs_fd(
        b, u0, identity_renorm(), t=0.25,
        box=((-4.0,), (4.0,)), n_coarse=257,
        probe_box=((-0.5,), (0.5,)), probes_per_axis=5,
        n_paths=20000, dt=1e-3, seed=37,
    )
    assert rep.passed
    assert rep.unreliable == 0
    assert rep.points.shape[0] == 5


def test_mc_vs_fd_smooth_sin():
    b = catalog("smooth_sin")
    u0 = InitialDatum(fn=lambda p: np.sin(p[..., 0]), sup_norm=1.0)
    rep = mc_vs_fd(
        b, u0, identity_renorm(), t=0.25,
        box=((-4.0,), (4.0,)), n_coarse=257,
        probe_box=((-1.0,), (1.0,)), probes_per_axis=7,
        n_paths=20000, dt=1e-3, seed=41,
    )
    assert rep.passed
    summary = rep.json_summary()
    assert summary["max_gap_over_tol"] <= 1.0
    lines = rep.csv_text().splitlines()
    assert lines[1] == "x,mc_mean,mc_stderr,fd_value,gap,tol,pass"
