"""Monte Carlo estimation of v(t, x) = E[beta(u(t, x))].

The expectation of the renormalized transport solution solves the
advection-diffusion equation, whose probabilistic representation runs
characteristics backward: dY = -b(Y) ds + dW from Y_0 = x, and
v(t, x) = E[beta(u0(Y_t))].  The reversal is cross-validated against
the finite-difference solver rather than trusted: that comparison is the
package's headline experiment.

Estimates are deterministic functions of (seed, n_paths, dt): every path
owns a counter-based stream, sums reduce in fixed chunk order, and the
worker count never changes a bit of output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import math
from typing import Sequence

import numpy as np

from .characteristics import em_endpoints
from .drifts import DriftSpec, catalog
from .errors import DomainError
from .fields import GridFunction, GridSpec, from_callable
from .parabolic import ParabolicConfig, boundary_influence_radius, solve_fd
from .transport_solutions import InitialDatum, Renormalization, deterministic_solution

__all__ = [
    "McEstimate",
    "SelectionInvarianceReport",
    "McVsFdReport",
    "feynman_kac",
    "feynman_kac_points",
    "selection_invariance",
    "mc_vs_fd",
]

ESCAPE_THRESHOLD = 0.01  # flagged unreliable beyond 1% escaped paths


@dataclasses.dataclass(frozen=True, eq=False)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    fingerprint: str
    escaped_frac: float = 0.0

    @property
    def reliable(self) -> bool:
        return self.escaped_frac <= ESCAPE_THRESHOLD


def _fingerprint(b: DriftSpec, t, dt, n_paths, seed, extra) -> str:
    doc = {
        "drift": b.name, "params": {k: str(v) for k, v in sorted(b.params.items())},
        "t": t, "dt": dt, "n_paths": n_paths, "seed": seed, "extra": extra,
    }
    return hashlib.sha1(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]


def feynman_kac_points(
    b: DriftSpec,
    u0: InitialDatum,
    beta: Renormalization,
    t: float,
    points: np.ndarray,
    n_paths: int,
    dt: float,
    seed: int,
    workers: int = 1,
    bounding_box: float = 1e6,
) -> list[McEstimate]:
    """Backward Feynman-Kac estimates at several points, shared streams.

    Path i drives every point with the (seed, i) increment stream; the
    per-point estimates remain independent-sample averages and the shared
    noise realizes the underlying stochastic flow.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ends, escaped = em_endpoints(
        b, "backward", points, t, dt, base_seed=seed, n_paths=n_paths,
        bounding_box=bounding_box, workers=workers,
    )
    vals = beta.beta(u0(ends))
    means = vals.mean(axis=0)
    stderrs = vals.std(axis=0, ddof=1) / math.sqrt(n_paths)
    esc = escaped.mean(axis=0)
    out = []
    for j in range(points.shape[0]):
        fp = _fingerprint(b, t, dt, n_paths, seed, list(map(float, points[j])))
        out.append(
            McEstimate(
                mean=float(means[j]), stderr=float(stderrs[j]), n_paths=n_paths,
                fingerprint=fp, escaped_frac=float(esc[j]),
            )
        )
    return out


def feynman_kac(
    b: DriftSpec,
    u0: InitialDatum,
    beta: Renormalization,
    t: float,
    x,
    n_paths: int,
    dt: float,
    seed: int,
    workers: int = 1,
    bounding_box: float = 1e6,
) -> McEstimate:
    """Estimate of E[beta(u(t, x))]; bounded by sup |beta(u0)| always."""
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    return feynman_kac_points(
        b, u0, beta, t, pts, n_paths, dt, seed, workers, bounding_box
    )[0]


@dataclasses.dataclass(eq=False)
class SelectionInvarianceReport:
    conventions: tuple[float, ...]
    points: np.ndarray                       # (m,) line abscissas
    means: np.ndarray                        # (n_conv, m)
    stderrs: np.ndarray                      # (n_conv, m)
    gaps_sigma: np.ndarray                   # worst |mean_i - mean_j| / (se_i + se_j)
    passed: bool
    deterministic_gap: float                 # sup |up - down| on the band

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("# selection invariance conventions="
                  + ";".join(format(c, "g") for c in self.conventions) + "\n")
        buf.write("x," + ",".join(
            f"mean_{i},stderr_{i}" for i in range(len(self.conventions))
        ) + ",gap_sigma\n")
        for j, x in enumerate(self.points):
            cells = [format(x, ".17g")]
            for i in range(len(self.conventions)):
                cells += [format(self.means[i, j], ".17g"),
                          format(self.stderrs[i, j], ".17g")]
            cells.append(format(self.gaps_sigma[j], ".17g"))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def selection_invariance(
    u0: InitialDatum,
    beta: Renormalization,
    t: float,
    line_xs: Sequence[float],
    n_paths: int,
    dt: float,
    seed: int,
    conventions: Sequence[float] = (1.0, -1.0, 0.0),
    workers: int = 1,
) -> SelectionInvarianceReport:
    """Tie-break invisibility of the drift value on the shear line.

    The conventions assign sign(0); runs share the seed so paths are
    coupled and differ only through drift evaluations exactly on the
    line.  Each pair must agree within 3 * (stderr_i + stderr_j) at every
    starting point; the deterministic counterpart (band fill up vs down)
    differs by order one and is reported alongside.
    """
    xs = np.asarray(line_xs, dtype=float)
    pts = np.stack([xs, np.zeros_like(xs)], axis=-1)
    means = []
    stderrs = []
    for conv in conventions:
        b = catalog("shear_flow", sign_zero=float(conv))
        ests = feynman_kac_points(b, u0, beta, t, pts, n_paths, dt, seed, workers)
        means.append([e.mean for e in ests])
        stderrs.append([e.stderr for e in ests])
    means = np.asarray(means)
    stderrs = np.asarray(stderrs)
    n_conv = len(conventions)
    gaps = np.zeros(xs.size)
    ok = True
    for i in range(n_conv):
        for j in range(i + 1, n_conv):
            delta = np.abs(means[i] - means[j])
            sig = stderrs[i] + stderrs[j]
            gaps = np.maximum(gaps, np.where(sig > 0, delta / np.maximum(sig, 1e-300), 0.0))
            ok &= bool(np.all(delta <= 3.0 * sig + 1e-14))

    up = deterministic_solution(u0, fill="up")
    down = deterministic_solution(u0, fill="down")
    band = np.stack([xs, np.full_like(xs, 0.5 * t * t)], axis=-1)
    det_gap = float(np.max(np.abs(
        beta.beta(up(t, band)) - beta.beta(down(t, band))
    )))
    return SelectionInvarianceReport(
        conventions=tuple(float(c) for c in conventions),
        points=xs, means=means, stderrs=stderrs, gaps_sigma=gaps,
        passed=ok, deterministic_gap=det_gap,
    )


@dataclasses.dataclass(eq=False)
class McVsFdReport:
    points: np.ndarray
    mc_mean: np.ndarray
    mc_stderr: np.ndarray
    fd_value: np.ndarray
    fd_error: np.ndarray
    gap: np.ndarray
    tol: np.ndarray
    point_pass: np.ndarray
    passed: bool
    influence_radius: float
    unreliable: int

    def csv_text(self) -> str:
        buf = io.StringIO()
        dim = self.points.shape[1]
        buf.write("# mc vs fd influence_radius="
                  + format(self.influence_radius, ".17g") + "\n")
        buf.write(("x,y" if dim == 2 else "x")
                  + ",mc_mean,mc_stderr,fd_value,gap,tol,pass\n")
        for j in range(self.points.shape[0]):
            cells = [format(v, ".17g") for v in self.points[j]]
            cells += [format(self.mc_mean[j], ".17g"),
                      format(self.mc_stderr[j], ".17g"),
                      format(self.fd_value[j], ".17g"),
                      format(self.gap[j], ".17g"),
                      format(self.tol[j], ".17g"),
                      "1" if self.point_pass[j] else "0"]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def json_summary(self) -> dict:
        return {
            "points": int(self.points.shape[0]),
            "max_gap": float(self.gap.max()),
            "max_gap_over_tol": float(np.max(self.gap / self.tol)),
            "passed": bool(self.passed),
            "unreliable": int(self.unreliable),
        }


def mc_vs_fd(
    b: DriftSpec,
    u0: InitialDatum,
    beta: Renormalization,
    t: float,
    box: tuple[Sequence[float], Sequence[float]],
    n_coarse: int,
    probe_box: tuple[Sequence[float], Sequence[float]],
    probes_per_axis: int,
    n_paths: int,
    dt: float,
    seed: int,
    scheme: str = "explicit-upwind",
    workers: int = 1,
) -> McVsFdReport:
    """Cross-validate Feynman-Kac estimates against the grid solver.

    The solver runs with datum beta(u0) on the box at the coarse and the
    node-nested doubled resolution; the measured error of the fine run
    is the Richardson difference at each probe.  A point passes when
    |MC - FD| <= 3 stderr + measured FD error.  Probes are coarse-grid
    nodes inside the probe box, which must stay clear of the audited
    boundary influence region.
    """
    lo, hi = box
    specs = [
        GridSpec(tuple(lo), tuple(hi), (n_coarse,) * b.dim),
        GridSpec(tuple(lo), tuple(hi), (2 * n_coarse - 1,) * b.dim),
    ]
    influence = boundary_influence_radius(b, specs[0], t)
    plo, phi_ = probe_box
    for axis in range(b.dim):
        if plo[axis] - lo[axis] < influence - 4.0 * math.sqrt(t) or \
           hi[axis] - phi_[axis] < influence - 4.0 * math.sqrt(t):
            # advective reach must never touch the probes; diffusive reach
            # is exponentially damped and enters the measured FD error
            raise DomainError("probe box too close to the domain boundary")

    fields = []
    for spec in specs:
        v0 = from_callable(spec, lambda p: beta.beta(u0(p)))
        dt_fd = ParabolicConfig.stable_dt(spec, b, scheme)
        steps = max(1, int(math.ceil(t / dt_fd)))
        cfg = ParabolicConfig(grid=spec, dt=t / steps, scheme=scheme)
        series = solve_fd(b, v0, t, cfg, record_every=10**9)
        if not series.max_principle_ok:
            raise RuntimeError("maximum principle violated in the FD reference")
        fields.append(series.snapshots[-1])

    coarse_spec = specs[0]
    axes_idx = []
    for axis in range(b.dim):
        ax = coarse_spec.axes()[axis]
        ok = np.nonzero((ax >= plo[axis]) & (ax <= phi_[axis]))[0]
        sel = np.unique(np.round(np.linspace(0, ok.size - 1, probes_per_axis)).astype(int))
        axes_idx.append(ok[sel])
    if b.dim == 1:
        coarse_flat = axes_idx[0]
        fine_flat = 2 * axes_idx[0]
        pts = coarse_spec.axes()[0][axes_idx[0]][:, None]
    else:
        ii, jj = np.meshgrid(axes_idx[0], axes_idx[1], indexing="ij")
        nc = coarse_spec.n[1]
        nf = specs[1].n[1]
        coarse_flat = (ii * nc + jj).ravel()
        fine_flat = ((2 * ii) * nf + 2 * jj).ravel()
        ax0 = coarse_spec.axes()[0][ii.ravel()]
        ax1 = coarse_spec.axes()[1][jj.ravel()]
        pts = np.stack([ax0, ax1], axis=-1)

    fd_fine = fields[1].values[fine_flat]
    fd_coarse = fields[0].values[coarse_flat]
    fd_err = np.abs(fd_fine - fd_coarse)

    ests = feynman_kac_points(b, u0, beta, t, pts, n_paths, dt, seed, workers)
    mc_mean = np.array([e.mean for e in ests])
    mc_stderr = np.array([e.stderr for e in ests])
    unreliable = sum(0 if e.reliable else 1 for e in ests)

    gap = np.abs(mc_mean - fd_fine)
    tol = 3.0 * mc_stderr + fd_err
    point_pass = gap <= tol
    return McVsFdReport(
        points=pts, mc_mean=mc_mean, mc_stderr=mc_stderr,
        fd_value=fd_fine, fd_error=fd_err, gap=gap, tol=tol,
        point_pass=point_pass,
        passed=bool(np.all(point_pass)) and unreliable == 0,
        influence_radius=influence, unreliable=unreliable,
    )
