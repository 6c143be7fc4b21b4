"""Experiment registry: named, config-driven, reproducible studies.

Each experiment consumes a JSON configuration (validated up front), runs
entirely from the recorded seed, and emits plot-ready CSV tables plus a
JSON report with a config echo and per-check pass/fail verdicts.
Re-running a config with the same seed reproduces every metric byte.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .commutator import l1_estimate_study, pointwise_bound_study
from .drifts import catalog, split_shear, split_sqrt, split_trivial
from .errors import TransportLabError, ValidationError
from .expectation_mc import mc_vs_fd, selection_invariance
from .fields import GridSpec, from_callable, snap_to_singular
from .mollifiers import (
    anisotropic_kernel,
    i_functional,
    isotropic_kernel,
    kernel_to_json,
    lambda_functional,
    minimize_lambda_rank_one,
)
from .parabolic import (
    ParabolicConfig,
    bv_tail,
    solve_fd,
    weight_grad_norm,
    weight_value,
    weighted_energy_check,
)
from .characteristics import integrate_sde
from .transport_solutions import (
    FlowSolution,
    InitialDatum,
    TestFunction,
    cube_renorm,
    deterministic_solution,
    gaussian_bump,
    identity_renorm,
    indicator_upper_half,
    sign_datum,
    square_renorm,
    weak_form_residual,
)

__all__ = ["ExperimentReport", "run", "validate", "list_experiments", "default_config"]

MAX_GRID_CELLS = 1 << 22  # resource guard for a single workstation core


@dataclasses.dataclass(eq=False)
class ExperimentReport:
    experiment: str
    config: dict
    metrics: dict
    checks: list  # [{"name": ..., "passed": bool, "detail": str}]
    outputs: list
    version: str = __version__
    wall_time_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        doc = dataclasses.asdict(self)
        doc["passed"] = self.passed
        return json.dumps(doc, sort_keys=True, indent=2, default=_json_default)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON-serializable: {type(v)}")


def _merge(defaults: dict, override: dict) -> dict:
    out = dict(defaults)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _drift_from(cfg: dict):
    return catalog(cfg["name"], **cfg.get("params", {}))


_DATUMS: dict[str, Callable] = {
    "sign": lambda cfg: sign_datum(),
    "indicator-upper": lambda cfg: indicator_upper_half(),
    "sin": lambda cfg: InitialDatum(fn=lambda p: np.sin(p[..., 0]), sup_norm=1.0),
    "gaussian": lambda cfg: gaussian_bump(
        center=cfg.get("center", 0.0), width=cfg.get("width", 0.3),
        height=cfg.get("height", 1.0),
    ),
    "constant": lambda cfg: InitialDatum(
        fn=lambda p, c=float(cfg.get("value", 1.0)): np.full(p.shape[:-1], c),
        sup_norm=abs(float(cfg.get("value", 1.0))),
    ),
}

_BETAS = {"identity": identity_renorm, "square": square_renorm, "cube": cube_renorm}


def _datum_from(cfg: dict) -> InitialDatum:
    return _DATUMS[cfg["name"]](cfg)


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


# ---------------------------------------------------------------- commutator

_COMMUTATOR_DEFAULTS = {
    "drift": {"name": "sign_1d", "params": {}},
    "u0": {"name": "sign"},
    "grid": {"lo": [-2.2], "hi": [2.2], "n": [2253]},
    "ladder": [0.2, 0.1, 0.05, 0.025, 0.0125],
    "region": {"lo": [-1.0], "hi": [1.0]},
    "pointwise": True,
    "pointwise_ladder": [0.2, 0.1, 0.05],
}


def _validate_commutator(cfg: dict) -> list[str]:
    out = []
    try:
        b = _drift_from(cfg["drift"])
    except TransportLabError as exc:
        return [str(exc)]
    g = cfg["grid"]
    if any(m < 8 for m in g["n"]):
        out.append(f"grid needs >= 8 points per axis, got {g['n']}")
        return out
    if int(np.prod(g["n"])) > MAX_GRID_CELLS:
        out.append(f"grid size {np.prod(g['n'])} exceeds budget {MAX_GRID_CELLS}")
    h = max((hi - lo) / (m - 1) for lo, hi, m in zip(g["lo"], g["hi"], g["n"]))
    ladder = list(cfg["ladder"])
    if any(b2 >= a for a, b2 in zip(ladder, ladder[1:])):
        out.append(f"ladder must be strictly decreasing, got {ladder}")
    if ladder and min(ladder) < 2 * h:
        out.append(
            f"smallest eps {min(ladder)} violates eps >= 2h = {2 * h:.6g}"
        )
    r = cfg["region"]
    emax = max(ladder) if ladder else 0.0
    for axis in range(b.dim):
        if r["lo"][axis] - emax < g["lo"][axis] or r["hi"][axis] + emax > g["hi"][axis]:
            out.append(
                f"region axis {axis} plus eps={emax} leaves the grid "
                f"[{g['lo'][axis]}, {g['hi'][axis]}]"
            )
    return out


def _run_commutator(cfg: dict, workers: int):
    b = _drift_from(cfg["drift"])
    g = cfg["grid"]
    spec = snap_to_singular(g["lo"], g["hi"], g["n"], b.singular_coords())
    u = from_callable(spec, _datum_from(cfg["u0"]))
    kern = isotropic_kernel(b.dim)
    region = (tuple(cfg["region"]["lo"]), tuple(cfg["region"]["hi"]))
    rep = l1_estimate_study(u, b, kern, cfg["ladder"], region)

    checks = [
        _check(
            "l1-within-bv-bound",
            all(
                l1 <= 1.1 * (bb + ba)
                for l1, bb, ba in zip(rep.l1_values, rep.bound_bv_eps, rep.bound_ac_eps)
            ),
            f"l1={list(rep.l1_values)} vs 1.1*(bv+ac) per eps",
        )
    ]
    if b.name == "constant":
        checks.append(_check(
            "l1-vanishes", max(rep.l1_values) <= 1e-10,
            f"max l1 = {max(rep.l1_values):.3g}",
        ))
    if b.bv is not None and b.bv.singular_box(*region) == 0.0 and b.name != "constant" \
            and cfg["ladder"][0] / cfg["ladder"][-1] >= 8:
        checks.append(_check(
            "l1-decays", rep.l1_values[-1] <= 0.25 * rep.l1_values[0],
            f"first={rep.l1_values[0]:.3g} last={rep.l1_values[-1]:.3g}",
        ))

    metrics = {
        "l1_values": list(rep.l1_values),
        "bound_bv": rep.bound_bv,
        "bound_lambda": rep.bound_lambda,
    }
    artifacts = {"commutator-l1.csv": rep.csv_text()}

    if cfg.get("pointwise") and b.dim == 1 and b.bv is not None and b.bv.ac_density is not None:
        prep = pointwise_bound_study(u, b, kern, cfg["pointwise_ladder"], region)
        sups = prep.pointwise_ratio_sup
        checks.append(_check(
            "pointwise-ratio-stable",
            prep.trivially_satisfied or all(s <= 2.0 * sups[0] for s in sups),
            f"ratio sups = {list(sups)}"
            + (" (trivially satisfied)" if prep.trivially_satisfied else ""),
        ))
        metrics["pointwise_ratio_sup"] = list(sups)
        artifacts["commutator-pointwise.csv"] = prep.csv_text()
    return metrics, checks, artifacts


# ---------------------------------------------------------------- anisotropy

_ANISOTROPY_DEFAULTS = {
    "eta": [1.0, 0.0],
    "zeta": [0.0, 1.0],
    "budget": 20,
}


def _validate_anisotropy(cfg: dict) -> list[str]:
    out = []
    if int(cfg["budget"]) < 1:
        out.append(f"budget must be >= 1, got {cfg['budget']}")
    for key in ("eta", "zeta"):
        v = np.asarray(cfg[key], dtype=float)
        if v.shape != (2,) or not np.linalg.norm(v) > 0:
            out.append(f"{key} must be a nonzero 2-vector")
    return out


def _run_anisotropy(cfg: dict, workers: int):
    eta = np.asarray(cfg["eta"], dtype=float)
    zeta = np.asarray(cfg["zeta"], dtype=float)
    eta = eta / np.linalg.norm(eta)
    zeta = zeta / np.linalg.norm(zeta)
    budget = int(cfg["budget"])
    M = np.outer(eta, zeta)
    iso = isotropic_kernel(2)
    lam_iso = lambda_functional(M, iso)

    buf = io.StringIO()
    buf.write("# anisotropy ladder eta=%s zeta=%s\n" % (
        ",".join(format(v, ".17g") for v in eta),
        ",".join(format(v, ".17g") for v in zeta),
    ))
    buf.write("aspect,lambda\n")
    for k in range(budget):
        a = 2.0**k
        cand = anisotropic_kernel(np.eye(2) + (a - 1.0) * np.outer(zeta, zeta))
        buf.write(f"{format(a, '.17g')},{format(lambda_functional(M, cand), '.17g')}\n")

    best, lam_best = minimize_lambda_rank_one(eta, zeta, budget)
    lam_id = lambda_functional(np.eye(2), best)
    metrics = {
        "lambda_isotropic": lam_iso,
        "lambda_best": lam_best,
        "ratio": lam_best / lam_iso,
        "lambda_identity_best": lam_id,
        "i_functional_best": i_functional(best),
        "kernel": json.loads(kernel_to_json(best)),
    }
    checks = [
        _check("best-not-worse", lam_best <= lam_iso + 1e-12,
               f"best {lam_best:.6g} vs isotropic {lam_iso:.6g}"),
        _check("identity-lower-bound", lam_id >= 2.0 - 1e-3,
               f"Lambda(I, best) = {lam_id:.6g}"),
    ]
    if abs(float(eta @ zeta)) < 1e-12:
        checks.append(_check(
            "rank-one-smallness", lam_best <= 0.2 * lam_iso,
            f"ratio = {lam_best / lam_iso:.3g}",
        ))
    else:
        checks.append(_check(
            "trace-lower-bound", lam_best >= abs(float(eta @ zeta)) - 1e-3,
            f"lambda {lam_best:.6g} vs |trace| {abs(float(eta @ zeta)):.6g}",
        ))
    return metrics, checks, {"anisotropy-ladder.csv": buf.getvalue()}


# ---------------------------------------------------------- weak-form residual

_RESIDUAL_DEFAULTS = {
    "variant": "deterministic-shear",
    "t": 0.5,
    "fills": ["up", "down"],
    "levels": [[128, 512], [256, 1024]],
    "phi": {"center": [0.0, 0.0], "radius": [0.9, 0.9]},
    "min_factor": 1.5,
    "max_final_residual": 5e-3,
    # stochastic variant
    "n_paths": 20,
    "drift": {"name": "smooth_sin", "params": {}},
    "u0": {"name": "sign"},
    "stochastic_levels": [[64, 512], [128, 1024]],
    "phi_1d": {"center": [0.0], "radius": [0.8]},
}


def _validate_residual(cfg: dict) -> list[str]:
    out = []
    if cfg["variant"] not in ("deterministic-shear", "stochastic-flow"):
        out.append(f"unknown variant {cfg['variant']!r}")
    levels = cfg["levels" if cfg["variant"] == "deterministic-shear" else "stochastic_levels"]
    if len(levels) < 2:
        out.append("need at least two refinement levels")
    for cells, nt in levels:
        if cells < 8 or nt < 8:
            out.append(f"level ({cells},{nt}) too coarse")
        if cells * cells > MAX_GRID_CELLS:
            out.append(f"level {cells} exceeds the cell budget")
    return out


def _run_residual(cfg: dict, workers: int):
    if cfg["variant"] == "deterministic-shear":
        return _run_residual_deterministic(cfg)
    return _run_residual_stochastic(cfg)


def _run_residual_deterministic(cfg: dict):
    b = catalog("shear_flow")
    u0 = indicator_upper_half()
    phi = TestFunction(center=tuple(cfg["phi"]["center"]), radius=tuple(cfg["phi"]["radius"]))
    t = float(cfg["t"])
    buf = io.StringIO()
    buf.write("mode,h,dt,t,residual\n")
    metrics = {}
    checks = []
    for fill in cfg["fills"]:
        u = deterministic_solution(u0, fill=fill)
        resids = []
        for cells, nt in cfg["levels"]:
            res = weak_form_residual(u, b, phi, t, "deterministic",
                                     n_cells=int(cells), n_time=int(nt))
            h = (phi.support_box[1][0] - phi.support_box[0][0]) / cells
            buf.write(f"{fill},{format(h, '.17g')},{format(t / nt, '.17g')},"
                      f"{format(t, '.17g')},{format(res.residual, '.17g')}\n")
            resids.append(res.residual)
        metrics[f"residuals_{fill}"] = resids
        factors = [resids[i] / max(resids[i + 1], 1e-300) for i in range(len(resids) - 1)]
        checks.append(_check(
            f"residual-converges-{fill}",
            all(f >= cfg["min_factor"] for f in factors),
            f"factors per doubling = {[round(f, 3) for f in factors]}",
        ))
        checks.append(_check(
            f"residual-small-{fill}",
            resids[-1] <= cfg["max_final_residual"],
            f"final residual = {resids[-1]:.3g}",
        ))
    # non-uniqueness witness on the band
    up = deterministic_solution(u0, fill="up")
    down = deterministic_solution(u0, fill="down")
    xs = np.linspace(-0.5, 0.5, 21)
    band = np.stack([xs, np.full_like(xs, 0.5 * t * t)], axis=-1)
    gap = float(np.max(np.abs(up(t, band) - down(t, band))))
    metrics["band_gap"] = gap
    checks.append(_check("solutions-differ-on-band", gap >= 0.5, f"sup gap = {gap}"))
    return metrics, checks, {"weak-form-residual.csv": buf.getvalue()}


def _run_residual_stochastic(cfg: dict):
    b = _drift_from(cfg["drift"])
    u0 = _datum_from(cfg["u0"])
    phi = TestFunction(center=tuple(cfg["phi_1d"]["center"]),
                       radius=tuple(cfg["phi_1d"]["radius"]))
    t = float(cfg["t"])
    n_paths = int(cfg["n_paths"])
    seed = int(cfg["seed"])
    buf = io.StringIO()
    buf.write("mode,h,dt,t,residual\n")
    level_stats = []
    qv_rows = []
    for cells, nt in cfg["stochastic_levels"]:
        dt = t / nt
        strat_vals, ito_vals = [], []
        qv_diffs = []
        for pid in range(n_paths):
            path = integrate_sde(b, "forward", [0.0] * b.dim, t, dt,
                                 seed=seed, path_index=pid)
            flow = FlowSolution(b=b, u0=u0, path=path)
            res_s = weak_form_residual(flow.value, b, phi, t, "stratonovich",
                                       path=path, n_cells=int(cells))
            res_i = weak_form_residual(flow.value, b, phi, t, "ito",
                                       path=path, n_cells=int(cells))
            strat_vals.append(res_s.residual)
            ito_vals.append(res_i.residual)
            qv_diffs.append(res_i.qv_partition[0] - res_i.qv_analytic[0])
        h = (phi.support_box[1][0] - phi.support_box[0][0]) / cells
        for mode, vals in (("stratonovich", strat_vals), ("ito", ito_vals)):
            buf.write(f"{mode},{format(h, '.17g')},{format(dt, '.17g')},"
                      f"{format(t, '.17g')},{format(float(np.mean(vals)), '.17g')}\n")
        level_stats.append((float(np.mean(strat_vals)), float(np.mean(ito_vals))))
        qv_diffs = np.asarray(qv_diffs)
        qv_rows.append(
            (float(qv_diffs.mean()), float(qv_diffs.std(ddof=1) / math.sqrt(n_paths)))
        )
    metrics = {
        "strat_residuals": [s for s, _ in level_stats],
        "ito_residuals": [i for _, i in level_stats],
        "qv_mismatch_mean": [m for m, _ in qv_rows],
        "qv_mismatch_se": [s for _, s in qv_rows],
    }
    checks = []
    s0, s1 = metrics["strat_residuals"][0], metrics["strat_residuals"][-1]
    i0, i1 = metrics["ito_residuals"][0], metrics["ito_residuals"][-1]
    checks.append(_check("strat-residual-converges", s0 / max(s1, 1e-300) >= cfg["min_factor"],
                         f"factor = {s0 / max(s1, 1e-300):.3g}"))
    checks.append(_check("ito-residual-converges", i0 / max(i1, 1e-300) >= cfg["min_factor"],
                         f"factor = {i0 / max(i1, 1e-300):.3g}"))
    m, se = qv_rows[-1]
    checks.append(_check("qv-partition-matches-integral", abs(m) <= 3.0 * se,
                         f"mean mismatch {m:.3g} vs 3*se = {3 * se:.3g}"))
    return metrics, checks, {"weak-form-residual.csv": buf.getvalue()}


# ---------------------------------------------------------------- mc-vs-fd

_MCFD_DEFAULTS = {
    "drift": {"name": "smooth_sin", "params": {}},
    "u0": {"name": "sin"},
    "beta": "identity",
    "t": 0.25,
    "box": {"lo": [-4.0], "hi": [4.0]},
    "n_coarse": 257,
    "probe_box": {"lo": [-1.0], "hi": [1.0]},
    "probes_per_axis": 21,
    "n_paths": 100000,
    "dt": 1e-3,
    "scheme": "explicit-upwind",
}


def _validate_mcfd(cfg: dict) -> list[str]:
    out = []
    try:
        b = _drift_from(cfg["drift"])
    except TransportLabError as exc:
        return [str(exc)]
    if cfg["beta"] not in _BETAS:
        out.append(f"unknown beta {cfg['beta']!r}")
    if cfg["u0"]["name"] not in _DATUMS:
        out.append(f"unknown datum {cfg['u0']['name']!r}")
    n = int(cfg["n_coarse"])
    if (2 * n - 1) ** b.dim > MAX_GRID_CELLS:
        out.append(f"fine grid {(2 * n - 1) ** b.dim} cells exceeds budget")
    if int(cfg["n_paths"]) < 100:
        out.append("n_paths must be >= 100")
    # the run derives its own stable solver dt; only impossible schemes fail here
    if cfg["scheme"] not in ("explicit-upwind", "implicit-diffusion-explicit-advection"):
        out.append(f"unknown scheme {cfg['scheme']!r}")
    return out


def _run_mcfd(cfg: dict, workers: int):
    b = _drift_from(cfg["drift"])
    rep = mc_vs_fd(
        b, _datum_from(cfg["u0"]), _BETAS[cfg["beta"]](), float(cfg["t"]),
        box=(tuple(cfg["box"]["lo"]), tuple(cfg["box"]["hi"])),
        n_coarse=int(cfg["n_coarse"]),
        probe_box=(tuple(cfg["probe_box"]["lo"]), tuple(cfg["probe_box"]["hi"])),
        probes_per_axis=int(cfg["probes_per_axis"]),
        n_paths=int(cfg["n_paths"]), dt=float(cfg["dt"]), seed=int(cfg["seed"]),
        scheme=cfg["scheme"], workers=workers,
    )
    metrics = rep.json_summary()
    metrics["influence_radius"] = rep.influence_radius
    checks = [
        _check("mc-matches-fd", rep.passed,
               f"max gap/tol = {metrics['max_gap_over_tol']:.3g} over "
               f"{metrics['points']} probes"),
        _check("mc-reliable", rep.unreliable == 0,
               f"{rep.unreliable} unreliable estimates"),
    ]
    return metrics, checks, {"mc-vs-fd.csv": rep.csv_text()}


# ------------------------------------------------------------ shear uniqueness

_SHEAR_DEFAULTS = {
    "t": 0.5,
    "residual_levels": [[128, 512], [256, 1024]],
    "phi": {"center": [0.0, 0.0], "radius": [0.9, 0.9]},
    "line_xs": [-0.4, -0.2, 0.0, 0.2, 0.4],
    "invariance_paths": 10000,
    "invariance_dt": 1e-3,
    "mcfd": {
        "box": {"lo": [-4.0, -4.0], "hi": [4.0, 4.0]},
        "n_coarse": 257,
        "probe_box": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]},
        "probes_per_axis": 5,
        "n_paths": 100000,
        "dt": 1e-3,
        "scheme": "implicit-diffusion-explicit-advection",
    },
}


def _validate_shear(cfg: dict) -> list[str]:
    out = []
    if float(cfg["t"]) <= 0:
        out.append("t must be positive")
    n = int(cfg["mcfd"]["n_coarse"])
    if (2 * n - 1) ** 2 > MAX_GRID_CELLS:
        out.append(f"fine grid {(2 * n - 1) ** 2} cells exceeds budget")
    if int(cfg["invariance_paths"]) < 100:
        out.append("invariance_paths must be >= 100")
    return out


def _run_shear(cfg: dict, workers: int):
    t = float(cfg["t"])
    seed = int(cfg["seed"])
    residual_cfg = {
        "variant": "deterministic-shear",
        "t": t,
        "fills": ["up", "down"],
        "levels": cfg["residual_levels"],
        "phi": cfg["phi"],
        "min_factor": 1.5,
        "max_final_residual": 5e-3,
        "seed": seed,
    }
    metrics, checks, artifacts = _run_residual_deterministic(residual_cfg)

    inv = selection_invariance(
        indicator_upper_half(), square_renorm(), t,
        cfg["line_xs"], int(cfg["invariance_paths"]),
        float(cfg["invariance_dt"]), seed, workers=workers,
    )
    metrics["invariance_max_gap_sigma"] = float(inv.gaps_sigma.max())
    metrics["invariance_deterministic_gap"] = inv.deterministic_gap
    checks.append(_check(
        "tie-break-invisible", inv.passed,
        f"max |gap|/sigma = {inv.gaps_sigma.max():.3g} across "
        f"{len(inv.conventions)} conventions",
    ))
    checks.append(_check(
        "deterministic-branch-gap", inv.deterministic_gap >= 0.5,
        f"up vs down gap = {inv.deterministic_gap}",
    ))
    artifacts["selection-invariance.csv"] = inv.csv_text()

    m = cfg["mcfd"]
    rep = mc_vs_fd(
        catalog("shear_flow"), indicator_upper_half(), square_renorm(), t,
        box=(tuple(m["box"]["lo"]), tuple(m["box"]["hi"])),
        n_coarse=int(m["n_coarse"]),
        probe_box=(tuple(m["probe_box"]["lo"]), tuple(m["probe_box"]["hi"])),
        probes_per_axis=int(m["probes_per_axis"]),
        n_paths=int(m["n_paths"]), dt=float(m["dt"]), seed=seed,
        scheme=m["scheme"], workers=workers,
    )
    metrics["mcfd"] = rep.json_summary()
    checks.append(_check(
        "expectation-matches-parabolic", rep.passed,
        f"max gap/tol = {metrics['mcfd']['max_gap_over_tol']:.3g}",
    ))
    artifacts["mc-vs-fd.csv"] = rep.csv_text()
    return metrics, checks, artifacts


# ------------------------------------------------------------- energy-gronwall

_ENERGY_DEFAULTS = {
    "split": "shear",  # shear | sqrt | smooth_sin | constant
    "threshold": 1.0,
    "grid": {"lo": [-3.0, -3.0], "hi": [3.0, 3.0], "n": [97, 97]},
    "datum": {"name": "gaussian", "width": 0.4},
    "T": 0.2,
    "scheme": "implicit-diffusion-explicit-advection",
    "N": 3.0,
    "C_N": 10.0,
    "record_every": 4,
    "tail_N": 2.0,
    "tail_R": [1.0, 2.0, 5.0, 10.0, 100.0],
}


def _split_from(cfg: dict):
    kind = cfg["split"]
    if kind == "shear":
        return split_shear(threshold=float(cfg.get("threshold", 1.0)))
    if kind == "sqrt":
        return split_sqrt(threshold=float(cfg.get("threshold", 1.0)))
    if kind == "smooth_sin":
        return split_trivial(catalog("smooth_sin"), 1.0)
    if kind == "constant":
        c = tuple(cfg.get("c", (1.0,)))
        return split_trivial(catalog("constant", c=c), float(np.linalg.norm(c)))
    raise ValidationError(f"unknown split {kind!r}")


def _validate_energy(cfg: dict) -> list[str]:
    out = []
    try:
        split = _split_from(cfg)
    except (ValidationError, TransportLabError) as exc:
        return [str(exc)]
    g = cfg["grid"]
    dims = len(g["n"])
    if dims != split.parent.dim:
        out.append(f"grid dim {dims} != drift dim {split.parent.dim}")
        return out
    if int(np.prod(g["n"])) > MAX_GRID_CELLS:
        out.append("grid exceeds the cell budget")
    spec = GridSpec(tuple(g["lo"]), tuple(g["hi"]), tuple(g["n"]))
    dt = ParabolicConfig.stable_dt(spec, split.parent, cfg["scheme"])
    if dt <= 0 or not math.isfinite(dt):
        out.append("no stable time step for this configuration")
    return out


def _run_energy(cfg: dict, workers: int):
    split = _split_from(cfg)
    g = cfg["grid"]
    spec = GridSpec(tuple(g["lo"]), tuple(g["hi"]), tuple(g["n"]))
    v0 = from_callable(spec, _datum_from(cfg["datum"]))
    dt = ParabolicConfig.stable_dt(spec, split.parent, cfg["scheme"])
    steps = max(1, int(math.ceil(float(cfg["T"]) / dt)))
    pcfg = ParabolicConfig(grid=spec, dt=float(cfg["T"]) / steps, scheme=cfg["scheme"])
    series = solve_fd(split.parent, v0, float(cfg["T"]), pcfg,
                      record_every=int(cfg["record_every"]))
    report = weighted_energy_check(series, split, float(cfg["N"]), float(cfg["C_N"]))

    pts = spec.points()
    lhs = (1.0 + np.linalg.norm(pts, axis=-1)) * weight_grad_norm(pts, float(cfg["N"]))
    rhs = float(cfg["N"]) * weight_value(pts, float(cfg["N"]))
    weight_ok = bool(np.max(np.abs(lhs - rhs)) <= 1e-13 * float(cfg["N"]))

    buf = io.StringIO()
    buf.write("t,E,gradE,min,max\n")
    for i, tt in enumerate(report.energy.times):
        snap = series.snapshots[i]
        buf.write(",".join(format(v, ".17g") for v in (
            tt, report.energy.energy[i], report.energy.grad_energy[i],
            float(snap.values.min()), float(snap.values.max()),
        )) + "\n")

    checks = [
        _check("weight-identity-exact", weight_ok, "(1+|x|)|grad w| = N w at all nodes"),
        _check("energy-envelope", report.passed,
               f"C_N={report.C_N}, alpha={report.alpha:.6g}"),
        _check("maximum-principle", series.max_principle_ok,
               f"worst violation = {series.max_violation:.3g}"),
    ]
    metrics = {
        "alpha": report.alpha,
        "energy": list(report.energy.energy),
        "grad_energy": list(report.energy.grad_energy),
    }
    artifacts = {"energy-series.csv": buf.getvalue()}

    parent = split.parent
    if parent.bv is not None and parent.bv.tail_weighted is not None:
        tails = [bv_tail(parent, float(cfg["tail_N"]), float(R), horizon=1.0)
                 for R in cfg["tail_R"]]
        metrics["bv_tail"] = tails
        checks.append(_check(
            "bv-tail-monotone-vanishing",
            all(b2 < a for a, b2 in zip(tails, tails[1:])) and tails[-1] < 0.25 * tails[0],
            f"tails = {[round(v, 4) for v in tails]}",
        ))
        tbuf = io.StringIO()
        tbuf.write("R,tail\n")
        for R, val in zip(cfg["tail_R"], tails):
            tbuf.write(f"{format(float(R), '.17g')},{format(val, '.17g')}\n")
        artifacts["bv-tail.csv"] = tbuf.getvalue()
    return metrics, checks, artifacts


# ------------------------------------------------------------------- registry

@dataclasses.dataclass(frozen=True)
class _Experiment:
    id: str
    description: str
    anchor: str
    defaults: dict
    validator: Callable[[dict], list[str]]
    runner: Callable[[dict, int], tuple]


_REGISTRY = {
    e.id: e
    for e in [
        _Experiment(
            "commutator-study",
            "commutator L1 decay and total-variation bounds on the eps ladder",
            "mollification commutator estimates for BV drifts",
            _COMMUTATOR_DEFAULTS, _validate_commutator, _run_commutator,
        ),
        _Experiment(
            "anisotropy-study",
            "anisotropic kernel search shrinking Lambda on rank-one matrices",
            "kernel anisotropy functionals Lambda and I",
            _ANISOTROPY_DEFAULTS, _validate_anisotropy, _run_anisotropy,
        ),
        _Experiment(
            "weak-form-residual",
            "weak-formulation residual convergence, deterministic and pathwise",
            "weak solutions tested against compactly supported bumps",
            _RESIDUAL_DEFAULTS, _validate_residual, _run_residual,
        ),
        _Experiment(
            "mc-vs-fd",
            "Feynman-Kac expectation against the advection-diffusion solver",
            "expectation of renormalized solutions solves the parabolic equation",
            _MCFD_DEFAULTS, _validate_mcfd, _run_mcfd,
        ),
        _Experiment(
            "shear-uniqueness",
            "deterministic branch ambiguity vs stochastic selection invariance",
            "compressible shear flow example",
            _SHEAR_DEFAULTS, _validate_shear, _run_shear,
        ),
        _Experiment(
            "energy-gronwall",
            "weighted energy envelope, weight identity, and BV tail decay",
            "weighted Gronwall uniqueness diagnostics",
            _ENERGY_DEFAULTS, _validate_energy, _run_energy,
        ),
    ]
}


def list_experiments() -> list[tuple[str, str, str]]:
    """(id, one-line description, anchor) rows for every experiment."""
    return [(e.id, e.description, e.anchor) for e in _REGISTRY.values()]


def default_config(experiment: str) -> dict:
    exp = _REGISTRY[experiment]
    cfg = json.loads(json.dumps(exp.defaults))
    cfg["experiment"] = experiment
    return cfg


def _resolve(config: dict) -> tuple[_Experiment, dict]:
    if "experiment" not in config:
        raise ValidationError("config is missing the 'experiment' field")
    exp_id = config["experiment"]
    if exp_id not in _REGISTRY:
        raise ValidationError(
            f"unknown experiment {exp_id!r}; known: {', '.join(sorted(_REGISTRY))}"
        )
    exp = _REGISTRY[exp_id]
    merged = _merge(exp.defaults, {k: v for k, v in config.items() if k != "experiment"})
    merged["experiment"] = exp_id
    return exp, merged


def validate(config: dict) -> list[str]:
    """Every violated constraint; an empty list means run() will start."""
    try:
        exp, merged = _resolve(config)
    except ValidationError as exc:
        return [str(exc)]
    out = []
    if "seed" not in merged or merged["seed"] is None:
        out.append("seed is mandatory (no wall-clock default)")
    else:
        try:
            int(merged["seed"])
        except (TypeError, ValueError):
            out.append(f"seed must be an integer, got {merged['seed']!r}")
    out.extend(exp.validator(merged))
    return out


def run(config: dict, out_dir, workers: int = 1) -> ExperimentReport:
    """Validate, execute, and persist one experiment."""
    diagnostics = validate(config)
    if diagnostics:
        raise ValidationError("; ".join(diagnostics))
    exp, merged = _resolve(config)
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    metrics, checks, artifacts = exp.runner(merged, workers)
    elapsed = time.perf_counter() - start

    outputs = []
    for name, text in artifacts.items():
        target = out_path / name
        with open(target, "w", newline="") as fh:
            fh.write(text)
        outputs.append(str(target))

    report = ExperimentReport(
        experiment=exp.id, config=merged, metrics=metrics,
        checks=checks, outputs=outputs, wall_time_s=elapsed,
    )
    with open(out_path / f"{exp.id}-report.json", "w") as fh:
        fh.write(report.to_json())
    return report
