"""Catalog of drift vector fields with divergence and total-variation data.

Every drift is autonomous.  Points are passed as arrays of shape
(..., dim); evaluation is vectorized and pure.  Total-variation data for
the distributional derivative Db is stored in closed form (atoms on the
jump set plus the density of the absolutely continuous part) because it
serves as ground truth for the commutator estimates.

Convention: sign(0) = 0 unless a drift is built with an explicit
``sign_zero`` override.  This makes the shear-flow separation line a rest
point of the deterministic characteristics; the convention is irrelevant
almost everywhere and the stochastic experiments verify that statistically.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, UnknownDriftError

__all__ = [
    "Hyperplane",
    "BVData",
    "DriftSpec",
    "DriftSplit",
    "catalog",
    "catalog_names",
    "split_shear",
    "split_sqrt",
    "split_trivial",
    "alpha_rate",
    "prodi_serrin_norm",
]


@dataclasses.dataclass(frozen=True)
class Hyperplane:
    """Axis-aligned hyperplane {x[axis] = value} (a point in 1D, a line in 2D)."""

    axis: int
    value: float


@dataclasses.dataclass(frozen=True, eq=False)
class BVData:
    """Closed-form total-variation data of the matrix measure Db.

    ``singular_box``/``ac_box`` return |D^s b|(Q) and |D^a b|(Q) for an
    axis-aligned box Q = (lo, hi).  ``atoms`` lists point atoms (1D) as
    (position, mass); 2D line atoms are encoded by ``line_atom`` as
    (hyperplane, linear density).  ``ac_density`` is the pointwise density
    of |D^a b|.  ``singular_polar`` is the rank-one polar matrix of D^s b.
    ``tail_weighted(N, R)`` is int_{|x| >= R} (1+|x|)^-N d|Db|.
    """

    singular_box: Callable[[Sequence[float], Sequence[float]], float]
    ac_box: Callable[[Sequence[float], Sequence[float]], float]
    atoms: tuple[tuple[float, float], ...] = ()
    line_atom: tuple[Hyperplane, float] | None = None
    ac_density: Callable[[np.ndarray], np.ndarray] | None = None
    singular_polar: np.ndarray | None = None
    tail_weighted: Callable[[float, float], float] | None = None

    def total_box(self, lo, hi) -> float:
        return self.singular_box(lo, hi) + self.ac_box(lo, hi)


@dataclasses.dataclass(frozen=True, eq=False)
class DriftSpec:
    """A vector field with divergence, jump-set and BV metadata."""

    name: str
    dim: int
    params: dict
    eval_fn: Callable[[np.ndarray], np.ndarray]
    div_fn: Callable[[np.ndarray], np.ndarray]
    singular_set: tuple[Hyperplane, ...] = ()
    bv: BVData | None = None
    div_box_integral: Callable[[Sequence[float], Sequence[float]], float] | None = None
    labels: tuple[str, ...] = ("time-independent",)

    def eval(self, points: np.ndarray) -> np.ndarray:
        return self.eval_fn(np.asarray(points, dtype=float))

    def div(self, points: np.ndarray) -> np.ndarray:
        return self.div_fn(np.asarray(points, dtype=float))

    def singular_coords(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for hp in self.singular_set:
            out.setdefault(hp.axis, []).append(hp.value)
        return out

    def singular_mask(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of points lying on (within tol of) the singular set."""
        points = np.asarray(points, dtype=float)
        mask = np.zeros(points.shape[:-1], dtype=bool)
        for hp in self.singular_set:
            mask |= np.abs(points[..., hp.axis] - hp.value) <= tol
        return mask


@dataclasses.dataclass(frozen=True, eq=False)
class DriftSplit:
    """Decomposition b = b1 + b2 with the norms entering the growth rate."""

    parent: DriftSpec
    b1: DriftSpec
    b2: DriftSpec
    norms: dict  # keys: b1_sup, b2_growth_sup, div_b2_sup


def _sign(y: np.ndarray, zero: float = 0.0) -> np.ndarray:
    s = np.sign(y)
    if zero != 0.0:
        s = np.where(y == 0.0, zero, s)
    return s


def _abscos_antideriv(x):
    """G with G' = |cos|: G(x) = 2k + (-1)^k sin(x), k = floor(x/pi + 1/2)."""
    x = np.asarray(x, dtype=float)
    k = np.floor(x / math.pi + 0.5)
    return 2.0 * k + (-1.0) ** k * np.sin(x)


def _sqrt_signed(y):
    return np.sign(y) * np.sqrt(np.abs(y))


def _interval_tail_quad(density, N: float, R: float) -> float:
    """int_{|x|>=R} density(x) (1+|x|)^-N dx for an even 1D density."""
    val = integrate.quad(
        lambda x: density(x) * (1.0 + x) ** (-N), R, np.inf, limit=200
    )[0]
    return 2.0 * val


def _make_constant(c: Sequence[float]) -> DriftSpec:
    c = tuple(float(v) for v in np.atleast_1d(c))
    dim = len(c)
    cv = np.asarray(c)

    def ev(p):
        return np.broadcast_to(cv, p.shape).copy()

    def dv(p):
        return np.zeros(p.shape[:-1])

    bv = BVData(
        singular_box=lambda lo, hi: 0.0,
        ac_box=lambda lo, hi: 0.0,
        ac_density=lambda p: np.zeros(p.shape[:-1]),
        tail_weighted=lambda N, R: 0.0,
    )
    return DriftSpec(
        name="constant", dim=dim, params={"c": c},
        eval_fn=ev, div_fn=dv, bv=bv,
        div_box_integral=lambda lo, hi: 0.0,
    )


def _make_smooth_sin() -> DriftSpec:
    def ev(p):
        return np.sin(p)

    def dv(p):
        return np.cos(p[..., 0])

    bv = BVData(
        singular_box=lambda lo, hi: 0.0,
        ac_box=lambda lo, hi: float(_abscos_antideriv(hi[0]) - _abscos_antideriv(lo[0])),
        ac_density=lambda p: np.abs(np.cos(p[..., 0])),
        tail_weighted=lambda N, R: _interval_tail_quad(lambda x: abs(math.cos(x)), N, R),
    )
    return DriftSpec(
        name="smooth_sin", dim=1, params={},
        eval_fn=ev, div_fn=dv, bv=bv,
        div_box_integral=lambda lo, hi: float(np.sin(hi[0]) - np.sin(lo[0])),
    )


def _make_sign_1d(sign_zero: float = 0.0) -> DriftSpec:
    def ev(p):
        return _sign(p, sign_zero)

    def dv(p):
        return np.zeros(p.shape[:-1])

    def sing_box(lo, hi):
        return 2.0 if lo[0] <= 0.0 <= hi[0] else 0.0

    bv = BVData(
        singular_box=sing_box,
        ac_box=lambda lo, hi: 0.0,
        atoms=((0.0, 2.0),),
        ac_density=lambda p: np.zeros(p.shape[:-1]),
        singular_polar=np.array([[1.0]]),
        tail_weighted=lambda N, R: 2.0 if R <= 0.0 else 0.0,
    )
    return DriftSpec(
        name="sign_1d", dim=1, params={"sign_zero": sign_zero},
        eval_fn=ev, div_fn=dv,
        singular_set=(Hyperplane(0, 0.0),), bv=bv,
        div_box_integral=lambda lo, hi: 0.0,
    )


def _make_sqrt_1d() -> DriftSpec:
    def ev(p):
        return np.sqrt(np.abs(p))

    def dv(p):
        x = p[..., 0]
        with np.errstate(divide="ignore"):
            return np.where(x == 0.0, np.inf, np.sign(x) / (2.0 * np.sqrt(np.abs(x))))

    bv = BVData(
        singular_box=lambda lo, hi: 0.0,
        ac_box=lambda lo, hi: float(_sqrt_signed(hi[0]) - _sqrt_signed(lo[0])),
        ac_density=lambda p: 0.5 / np.sqrt(np.abs(p[..., 0])),
        tail_weighted=lambda N, R: _interval_tail_quad(
            lambda x: 0.5 / math.sqrt(x), N, max(R, 0.0)
        ) if R > 0 else np.inf,
    )
    return DriftSpec(
        name="sqrt_1d", dim=1, params={},
        eval_fn=ev, div_fn=dv,
        singular_set=(Hyperplane(0, 0.0),), bv=bv,
        div_box_integral=lambda lo, hi: float(
            np.sqrt(abs(hi[0])) - np.sqrt(abs(lo[0]))
        ),
    )


def _shear_tail(N: float, R: float) -> float:
    # Line part: 2 * int_{|x|>=R} (1+|x|)^-N dx along {y=0}.
    line = 4.0 * (1.0 + R) ** (1.0 - N) / (N - 1.0)
    # AC part in polar coordinates: density 1/sqrt(|y|) = r^-1/2 |sin t|^-1/2
    # separates into an angular Beta factor and a radial integral.
    angular = 2.0 * special.beta(0.25, 0.5)
    radial = integrate.quad(
        lambda r: math.sqrt(r) * (1.0 + r) ** (-N), R, np.inf, limit=200
    )[0]
    return line + angular * radial


def _make_shear(sign_zero: float = 0.0) -> DriftSpec:
    def ev(p):
        y = p[..., 1]
        s = _sign(y, sign_zero)
        out = np.empty_like(p)
        out[..., 0] = s
        out[..., 1] = 2.0 * s * np.sqrt(np.abs(y))
        return out

    def dv(p):
        y = p[..., 1]
        with np.errstate(divide="ignore"):
            return np.where(y == 0.0, np.inf, 1.0 / np.sqrt(np.abs(y)))

    def sing_box(lo, hi):
        return 2.0 * (hi[0] - lo[0]) if lo[1] <= 0.0 <= hi[1] else 0.0

    def ac_box(lo, hi):
        K = _sqrt_signed  # antiderivative of 1/(2 sqrt|y|); density integral is 2K
        return float((hi[0] - lo[0]) * 2.0 * (K(hi[1]) - K(lo[1])))

    bv = BVData(
        singular_box=sing_box,
        ac_box=ac_box,
        line_atom=(Hyperplane(1, 0.0), 2.0),
        ac_density=lambda p: 1.0 / np.sqrt(np.abs(p[..., 1])),
        singular_polar=np.array([[0.0, 1.0], [0.0, 0.0]]),  # e1 (x) e2
        tail_weighted=_shear_tail,
    )
    return DriftSpec(
        name="shear_flow", dim=2, params={"sign_zero": sign_zero},
        eval_fn=ev, div_fn=dv,
        singular_set=(Hyperplane(1, 0.0),), bv=bv,
        div_box_integral=lambda lo, hi: ac_box(lo, hi),
    )


_CATALOG = {
    "constant": _make_constant,
    "smooth_sin": _make_smooth_sin,
    "sign_1d": _make_sign_1d,
    "sqrt_1d": _make_sqrt_1d,
    "shear_flow": _make_shear,
}


def catalog_names() -> tuple[str, ...]:
    return tuple(sorted(_CATALOG))


def catalog(name: str, **params) -> DriftSpec:
    """Return the named drift, fully populated.

    Names: constant (params: c), smooth_sin, sign_1d (params: sign_zero),
    sqrt_1d, shear_flow (params: sign_zero).
    """
    try:
        maker = _CATALOG[name]
    except KeyError:
        raise UnknownDriftError(
            f"unknown drift {name!r}; known: {', '.join(catalog_names())}"
        ) from None
    return maker(**params)


def split_shear(threshold: float = 1.0, sign_zero: float = 0.0) -> DriftSplit:
    """Shear flow split into a bounded part and a linear-growth part.

    b1 truncates the vertical component at |y| = threshold, so it is
    bounded with sup-norm sqrt(1 + 4*threshold); b2 = b - b1 vanishes on
    {|y| <= threshold}, grows like 2*sqrt(|y|), and has bounded divergence
    1/sqrt(threshold).  All three norms are stored in closed form.
    """
    tau = float(threshold)
    if tau <= 0:
        raise ValueError("threshold must be positive")
    parent = _make_shear(sign_zero)

    def ev1(p):
        y = p[..., 1]
        s = _sign(y, sign_zero)
        out = np.empty_like(p)
        out[..., 0] = s
        out[..., 1] = 2.0 * s * np.sqrt(np.minimum(np.abs(y), tau))
        return out

    def dv1(p):
        y = p[..., 1]
        ay = np.abs(y)
        with np.errstate(divide="ignore"):
            inner = np.where(y == 0.0, np.inf, 1.0 / np.sqrt(ay))
        return np.where(ay < tau, inner, 0.0)

    def ev2(p):
        y = p[..., 1]
        s = _sign(y, sign_zero)
        out = np.zeros_like(p)
        out[..., 1] = 2.0 * s * np.maximum(np.sqrt(np.abs(y)) - math.sqrt(tau), 0.0)
        return out

    def dv2(p):
        y = p[..., 1]
        ay = np.abs(y)
        with np.errstate(divide="ignore"):
            outer = np.where(ay > tau, 1.0 / np.sqrt(ay), 0.0)
        return outer

    def k_tau(y):
        return 2.0 * np.sign(y) * np.sqrt(np.minimum(np.abs(y), tau))

    b1 = DriftSpec(
        name="shear_flow_b1", dim=2, params={"threshold": tau, "sign_zero": sign_zero},
        eval_fn=ev1, div_fn=dv1, singular_set=(Hyperplane(1, 0.0),),
        div_box_integral=lambda lo, hi: float(
            (hi[0] - lo[0]) * (k_tau(hi[1]) - k_tau(lo[1]))
        ),
    )
    b2 = DriftSpec(
        name="shear_flow_b2", dim=2, params={"threshold": tau, "sign_zero": sign_zero},
        eval_fn=ev2, div_fn=dv2,
    )
    norms = {
        "b1_sup": math.sqrt(1.0 + 4.0 * tau),
        "b2_growth_sup": 1.0 / (math.sqrt(tau) + math.sqrt(1.0 + tau)),
        "div_b2_sup": 1.0 / math.sqrt(tau),
    }
    return DriftSplit(parent=parent, b1=b1, b2=b2, norms=norms)


def split_sqrt(threshold: float = 1.0) -> DriftSplit:
    """sqrt drift split: b1 = sqrt(|x| ^ threshold truncation), b2 the rest."""
    tau = float(threshold)
    if tau <= 0:
        raise ValueError("threshold must be positive")
    parent = _make_sqrt_1d()

    def ev1(p):
        return np.sqrt(np.minimum(np.abs(p), tau))

    def dv1(p):
        x = p[..., 0]
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            inner = np.where(x == 0.0, np.inf, np.sign(x) / (2.0 * np.sqrt(ax)))
        return np.where(ax < tau, inner, 0.0)

    def ev2(p):
        return np.maximum(np.sqrt(np.abs(p)) - math.sqrt(tau), 0.0)

    def dv2(p):
        x = p[..., 0]
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            outer = np.where(ax > tau, np.sign(x) / (2.0 * np.sqrt(ax)), 0.0)
        return outer

    b1 = DriftSpec(
        name="sqrt_1d_b1", dim=1, params={"threshold": tau},
        eval_fn=ev1, div_fn=dv1, singular_set=(Hyperplane(0, 0.0),),
    )
    b2 = DriftSpec(
        name="sqrt_1d_b2", dim=1, params={"threshold": tau},
        eval_fn=ev2, div_fn=dv2,
    )
    norms = {
        "b1_sup": math.sqrt(tau),
        "b2_growth_sup": 0.5 / (math.sqrt(tau) + math.sqrt(1.0 + tau)),
        "div_b2_sup": 0.5 / math.sqrt(tau),
    }
    return DriftSplit(parent=parent, b1=b1, b2=b2, norms=norms)


def split_trivial(b: DriftSpec, b1_sup: float) -> DriftSplit:
    """Split with b2 = 0 for drifts that are already bounded."""
    zero = _make_constant((0.0,) * b.dim)
    norms = {"b1_sup": float(b1_sup), "b2_growth_sup": 0.0, "div_b2_sup": 0.0}
    return DriftSplit(parent=b, b1=b, b2=zero, norms=norms)


def alpha_rate(split: DriftSplit) -> float:
    """Gronwall rate alpha = |b1|_inf^2 + |b2/(1+|x|)|_inf^2 + |div b2|_inf."""
    try:
        return (
            split.norms["b1_sup"] ** 2
            + split.norms["b2_growth_sup"] ** 2
            + split.norms["div_b2_sup"]
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"split norms incomplete: {exc}") from exc


def prodi_serrin_norm(
    b: DriftSpec,
    p: float,
    q: float,
    region: tuple[Sequence[float], Sequence[float]],
    horizon: float,
    cells: int = 2000,
) -> tuple[float, bool]:
    """L^q(0,T; L^p(region)) norm of an autonomous drift and the exponent test.

    For time-independent b the norm is T^(1/q) * ||b||_{L^p(region)}; the
    boolean reports 2/q + dim/p <= 1.  Midpoint quadrature with an even
    cell count per axis, which keeps nodes off the catalog singular sets.
    """
    if not (1.0 < p < math.inf and 1.0 < q < math.inf):
        raise ValueError("need p, q in (1, inf)")
    lo, hi = region
    lo = [float(v) for v in lo]
    hi = [float(v) for v in hi]
    m = cells if cells % 2 == 0 else cells + 1
    if b.dim == 1:
        step = (hi[0] - lo[0]) / m
        x = lo[0] + (np.arange(m) + 0.5) * step
        pts = x[:, None]
        vol = step
    else:
        ma = max(2, int(round(math.sqrt(m))) // 2 * 2)
        steps = [(hi[i] - lo[i]) / ma for i in range(2)]
        ax = [lo[i] + (np.arange(ma) + 0.5) * steps[i] for i in range(2)]
        gx, gy = np.meshgrid(*ax, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        vol = steps[0] * steps[1]
    speed = np.linalg.norm(b.eval(pts), axis=-1)
    norm_p = float(np.sum(speed**p) * vol) ** (1.0 / p)
    norm = horizon ** (1.0 / q) * norm_p
    cond = 2.0 / q + b.dim / p <= 1.0 + 1e-12
    return norm, cond
