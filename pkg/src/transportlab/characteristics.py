"""Deterministic and stochastic characteristic flows.

Deterministic flows use explicit RK4 away from the drift's singular set.
Inside a band of width max(dt, 1e-12) around the set the branch a path
takes is genuinely ambiguous at integrator resolution, so an explicit
:class:`SelectionRule` dictates it; on the shear flow the branch is
advanced by its closed form (exact) until it exits the band.

Stochastic flows use Euler-Maruyama with additive unit noise, one
independent Brownian motion per coordinate.  Every path owns a
counter-based Philox stream keyed by (base_seed, path_index), so a path
is reproducible in isolation and ensembles are bit-identical regardless
of chunking, evaluation order, or worker count.
"""

from __future__ import annotations

import dataclasses
import io
import math
from multiprocessing import Pool

import numpy as np

from .drifts import DriftSpec, Hyperplane, catalog

__all__ = [
    "SelectionRule",
    "OdePath",
    "SdePath",
    "PathEnsemble",
    "shear_branches",
    "integrate_ode",
    "integrate_sde",
    "em_endpoints",
    "path_increments",
    "rng_for_path",
]


@dataclasses.dataclass(frozen=True)
class SelectionRule:
    """Branch a characteristic takes when it sits on the singular line."""

    branch: str  # "up" | "down" | "stay"
    delay: float = 0.0

    def __post_init__(self):
        if self.branch not in ("up", "down", "stay"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")

    @staticmethod
    def up() -> "SelectionRule":
        return SelectionRule("up")

    @staticmethod
    def down() -> "SelectionRule":
        return SelectionRule("down")

    @staticmethod
    def stay() -> "SelectionRule":
        return SelectionRule("stay")

    @staticmethod
    def delayed(delay: float, branch: str = "up") -> "SelectionRule":
        return SelectionRule(branch, delay)


@dataclasses.dataclass(eq=False)
class OdePath:
    times: np.ndarray
    states: np.ndarray  # (K+1, dim)
    escaped: bool = False


@dataclasses.dataclass(eq=False)
class SdePath:
    times: np.ndarray
    states: np.ndarray       # (K+1, dim)
    increments: np.ndarray   # (K, dim), Brownian increments N(0, dt I)
    base_seed: int
    path_index: int
    escaped: bool = False


@dataclasses.dataclass(eq=False)
class PathEnsemble:
    paths: list
    base_seed: int
    drift: str
    direction: str  # "forward" (+b) or "backward" (-b)

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            dim = self.paths[0].states.shape[1] if self.paths else 1
            fh.write("path_index,t,x" + (",y" if dim == 2 else "") + "\n")
            for p in self.paths:
                for t, s in zip(p.times, p.states):
                    coords = ",".join(format(v, ".17g") for v in s)
                    fh.write(f"{p.path_index},{format(t, '.17g')},{coords}\n")


def shear_branches(x0: float, t: float, rule: SelectionRule) -> np.ndarray:
    """Closed-form shear-flow characteristic from (x0, 0).

    up:   (x0 + (t-s), +(t-s)^2)   down: (x0 - (t-s), -(t-s)^2)
    stay: (x0, 0); a delayed rule with s > t has not yet departed.
    """
    if rule.branch == "stay" or t <= rule.delay:
        return np.array([x0, 0.0])
    tau = t - rule.delay
    sigma = 1.0 if rule.branch == "up" else -1.0
    return np.array([x0 + sigma * tau, sigma * tau * tau])


def _rk4_step(b: DriftSpec, state: np.ndarray, dt: float) -> np.ndarray:
    k1 = b.eval(state)
    k2 = b.eval(state + 0.5 * dt * k1)
    k3 = b.eval(state + 0.5 * dt * k2)
    k4 = b.eval(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _near_singular(b: DriftSpec, state: np.ndarray, tol: float) -> Hyperplane | None:
    for hp in b.singular_set:
        if abs(state[hp.axis] - hp.value) <= tol:
            return hp
    return None


def integrate_ode(
    b: DriftSpec,
    x0,
    T: float,
    dt: float,
    rule: SelectionRule = SelectionRule.stay(),
    bounding_box: float = 1e6,
) -> OdePath:
    """RK4 integration with explicit branch selection on the singular set.

    Within the band |coord - singular| <= max(dt, 1e-12) an "up"/"down"
    rule advances the state: by the exact branch formula on the shear flow
    (x += sigma*dt, y = sigma*(sqrt|y| + dt)^2 while in the band), by a
    nudge of size the band width for other drifts.  A state leaving the
    configured bounding box freezes the path and marks it escaped.
    """
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    state = np.asarray(x0, dtype=float).reshape(-1)
    if state.size != b.dim:
        raise ValueError("initial point dimension mismatch")
    K = int(round(T / dt))
    times = np.linspace(0.0, K * dt, K + 1)
    states = np.empty((K + 1, b.dim))
    states[0] = state
    tol = max(dt, 1e-12)
    is_shear = b.name.startswith("shear_flow")
    escaped = False

    for k in range(K):
        if escaped:
            states[k + 1] = state
            continue
        t0, t1 = times[k], times[k + 1]
        hp = _near_singular(b, state, tol)
        if hp is not None and rule.branch in ("up", "down") and t1 > rule.delay:
            sigma = 1.0 if rule.branch == "up" else -1.0
            rem = t1 - max(rule.delay, t0)
            if is_shear:
                y = state[1]
                tloc = math.sqrt(abs(y)) if y * sigma > 0 else 0.0
                state = np.array(
                    [state[0] + sigma * rem, sigma * (tloc + rem) ** 2]
                )
            else:
                nudged = state.copy()
                nudged[hp.axis] = hp.value + sigma * tol
                state = nudged + b.eval(nudged) * rem
        else:
            state = _rk4_step(b, state, dt)
        if np.max(np.abs(state)) > bounding_box:
            escaped = True
        states[k + 1] = state
    return OdePath(times=times, states=states, escaped=escaped)


def rng_for_path(base_seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (base_seed, path_index)."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.Philox(seq))


def path_increments(base_seed: int, path_index: int, steps: int, dim: int, dt: float) -> np.ndarray:
    """Brownian increments N(0, dt I) of a path's private stream."""
    g = rng_for_path(base_seed, path_index)
    return g.standard_normal((steps, dim)) * math.sqrt(dt)


def _direction_sign(direction: str) -> float:
    if direction == "forward":
        return 1.0
    if direction == "backward":
        return -1.0
    raise ValueError("direction must be 'forward' or 'backward'")


def integrate_sde(
    b: DriftSpec,
    direction: str,
    x0,
    T: float,
    dt: float,
    seed: int,
    path_index: int,
    bounding_box: float = 1e6,
) -> SdePath:
    """Euler-Maruyama path X_{k+1} = X_k +- b(X_k) dt + dW_k.

    The drift on the singular set uses the drift's own sign convention;
    the noise leaves the set immediately, so the convention is almost
    surely irrelevant (asserted statistically in the test suite).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    sgn = _direction_sign(direction)
    state = np.asarray(x0, dtype=float).reshape(-1)
    K = int(round(T / dt))
    dW = path_increments(seed, path_index, K, b.dim, dt)
    times = np.linspace(0.0, K * dt, K + 1)
    states = np.empty((K + 1, b.dim))
    states[0] = state
    escaped = False
    for k in range(K):
        if not escaped:
            state = state + sgn * b.eval(state) * dt + dW[k]
            if np.max(np.abs(state)) > bounding_box:
                escaped = True
        states[k + 1] = state
    return SdePath(
        times=times, states=states, increments=dW,
        base_seed=seed, path_index=path_index, escaped=escaped,
    )


def _endpoint_block(b, sgn, starts, K, dt, base_seed, i0, i1, box):
    """Endpoints of paths i0..i1-1 from every start, shared increments."""
    nb = i1 - i0
    m = starts.shape[0]
    dim = starts.shape[1]
    dW = np.empty((nb, K, dim))
    sq = math.sqrt(dt)
    for j in range(nb):
        dW[j] = rng_for_path(base_seed, i0 + j).standard_normal((K, dim)) * sq
    states = np.broadcast_to(starts, (nb, m, dim)).copy()
    escaped = np.zeros((nb, m), dtype=bool)
    for k in range(K):
        drift = b.eval(states.reshape(-1, dim)).reshape(nb, m, dim)
        nxt = states + sgn * drift * dt + dW[:, k][:, None, :]
        nxt[escaped] = states[escaped]
        states = nxt
        escaped |= np.max(np.abs(states), axis=-1) > box
    return states, escaped


def _endpoint_block_task(args):
    name, params, direction, starts, K, dt, base_seed, i0, i1, box = args
    b = catalog(name, **params)
    return _endpoint_block(
        b, _direction_sign(direction), starts, K, dt, base_seed, i0, i1, box
    )


def em_endpoints(
    b: DriftSpec,
    direction: str,
    starts: np.ndarray,
    T: float,
    dt: float,
    base_seed: int,
    n_paths: int,
    bounding_box: float = 1e6,
    chunk: int = 4096,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble endpoints X_T for every (path, start) pair.

    Returns ``(endpoints, escaped)`` with shapes (n_paths, m, dim) and
    (n_paths, m).  Path i draws its increments from the (base_seed, i)
    stream and drives every start point with them, so results do not
    depend on chunk size or worker count; escaped paths freeze at their
    first out-of-box state and stay flagged.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != b.dim:
        raise ValueError("start points dimension mismatch")
    sgn = _direction_sign(direction)
    K = int(round(T / dt))
    blocks = [(i, min(i + chunk, n_paths)) for i in range(0, n_paths, chunk)]

    use_pool = workers > 1 and b.name in ("constant", "smooth_sin", "sign_1d",
                                          "sqrt_1d", "shear_flow")
    if use_pool and len(blocks) > 1:
        tasks = [
            (b.name, b.params, direction, starts, K, dt, base_seed, i0, i1, bounding_box)
            for i0, i1 in blocks
        ]
        with Pool(processes=workers) as pool:
            results = pool.map(_endpoint_block_task, tasks)
    else:
        results = [
            _endpoint_block(b, sgn, starts, K, dt, base_seed, i0, i1, bounding_box)
            for i0, i1 in blocks
        ]
    endpoints = np.concatenate([r[0] for r in results], axis=0)
    escaped = np.concatenate([r[1] for r in results], axis=0)
    return endpoints, escaped
