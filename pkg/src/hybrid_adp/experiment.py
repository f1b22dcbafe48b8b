"""Experiment configuration, single runs, parameter sweeps and their file formats."""

from __future__ import annotations

import copy
import csv
import importlib.util
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .actor import ActorTuning
from .closed_loop import (
    ClosedLoopState,
    DiagnosticsLog,
    TargetSet,
    build_closed_loop,
    jump_decrease_factor,
    simulate_closed_loop,
)
from .critic import BASELINE, MODES, MOMENTUM, CriticState, CriticTuning, decrease_matrix, optimal_restart_period, validate_tuning
from .data import RecordedDataset, RichnessCertificate, certify_richness, lattice_grid, record_expert_grid
from .errors import ConfigurationError, UsageError, ValidationFailed
from .features import ActorRegressor, BasisSet, quadratic_monomial_basis
from .hybrid import HybridArc, IntegratorConfig
from .plant import builtin_example_plant

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("T", "k_c", "rho_d", "rho_i", "lambda")

DEFAULT_CONFIG: Dict[str, Any] = {
    "plant": "builtin-example",
    "basis": "quadratic-monomials",
    "dataset": {"generate": {"extent": 2.0, "counts": [4, 4]}, "richness_floor": 1e-8},
    "critic": {"k_c": 1.0, "rho_i": 1.0, "rho_d": 1.0, "T0": 0.1, "T": 5.5},
    "actor": {"k_u": 1.0, "alpha1": 1.0, "alpha2": 1.0},
    "integrator": {"step": 1e-3, "t_max": 60.0, "j_max": 10_000, "record_every": 10},
    "initial": {
        "x0": [-10.0, 10.0],
        "theta_c0": [1.0, 1.0, 1.0],
        "p0": None,
        "tau0": None,
        "theta_u0": [0.5, 0.5, 0.5],
    },
    "theta_c_star": None,
    "mode": MOMENTUM,
    "settle_radius": 0.1,
    # the default tuning does not satisfy the tuning inequalities for any
    # 16-sample dataset, so the builtin reproduction runs regardless
    "force": True,
    "out": "results",
    "sweep": None,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "dataset":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> dict:
    """Defaults, overlaid with the JSON file at ``path``, overlaid with ``overrides``."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        cfg = _merge(cfg, json.loads(Path(path).read_text()))
        base = Path(path).resolve().parent
        cfg["_base_dir"] = str(base)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def _resolve_path(cfg: dict, p) -> Path:
    p = Path(p)
    if not p.is_absolute() and "_base_dir" in cfg:
        p = Path(cfg["_base_dir"]) / p
    return p


def _load_factory(cfg: dict, entry: dict):
    path = _resolve_path(cfg, entry["module"])
    if not path.is_file():
        raise FileNotFoundError(f"plant/basis module not found: {path}")
    spec = importlib.util.spec_from_file_location(path.stem, path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return getattr(module, entry.get("factory", "make"))()


@dataclass
class Problem:
    plant: Any
    cost: Any
    ref: Any
    basis: BasisSet
    reg: ActorRegressor
    dataset: RecordedDataset
    certificate: RichnessCertificate
    theta_c_star: Optional[np.ndarray]


def resolve_problem(cfg: dict) -> Problem:
    if cfg["plant"] == "builtin-example":
        plant, cost, ref = builtin_example_plant()
    elif isinstance(cfg["plant"], dict):
        plant, cost, ref = _load_factory(cfg, cfg["plant"])
    else:
        raise ConfigurationError(f"unknown plant selector {cfg['plant']!r}")

    if cfg["basis"] == "quadratic-monomials":
        basis = quadratic_monomial_basis(plant.n)
    elif isinstance(cfg["basis"], dict):
        basis = _load_factory(cfg, cfg["basis"])
    else:
        raise ConfigurationError(f"unknown basis selector {cfg['basis']!r}")

    ds_cfg = cfg["dataset"]
    if "file" in ds_cfg:
        dataset = RecordedDataset.load(_resolve_path(cfg, ds_cfg["file"]))
    elif "generate" in ds_cfg:
        if ref is None:
            raise ConfigurationError("generating expert data needs a reference policy")
        gen = ds_cfg["generate"]
        grid = lattice_grid(float(gen.get("extent", 2.0)), gen.get("counts", [4] * plant.n))
        dataset = record_expert_grid(plant, cost, basis, ref, grid)
    else:
        raise ConfigurationError("dataset needs either 'file' or 'generate'")
    if "subset" in ds_cfg:
        dataset = dataset.subset(ds_cfg["subset"])
    if dataset.l_c != basis.l_c:
        raise ConfigurationError(f"dataset has l_c={dataset.l_c}, basis has l_c={basis.l_c}")

    cert = certify_richness(dataset, float(ds_cfg.get("richness_floor", 1e-8)))
    star = cfg.get("theta_c_star")
    if star is not None:
        star = np.asarray(star, dtype=float)
    elif ref is not None and ref.theta_c_star is not None:
        star = np.asarray(ref.theta_c_star, dtype=float)
    reg = ActorRegressor.build(basis, plant, cost)
    return Problem(plant, cost, ref, basis, reg, dataset, cert, star)


def critic_tuning(cfg: dict, mode: str) -> CriticTuning:
    c = cfg["critic"]
    return CriticTuning(k_c=c["k_c"], rho_i=c["rho_i"], rho_d=c["rho_d"], T0=c["T0"], T=c["T"], mode=mode)


def actor_tuning(cfg: dict) -> ActorTuning:
    a = cfg["actor"]
    return ActorTuning(k_u=a["k_u"], alpha1=a["alpha1"], alpha2=a["alpha2"])


def integrator_config(cfg: dict) -> IntegratorConfig:
    i = cfg["integrator"]
    return IntegratorConfig(step=i["step"], t_max=i["t_max"], j_max=int(i["j_max"]), record_every=int(i["record_every"]))


def initial_state(cfg: dict, problem: Problem, tuning: CriticTuning) -> ClosedLoopState:
    ini = cfg["initial"]
    l_c = problem.basis.l_c
    x0 = np.asarray(ini["x0"], dtype=float)
    th = np.asarray(ini["theta_c0"], dtype=float)
    p = th.copy() if ini.get("p0") is None else np.asarray(ini["p0"], dtype=float)
    tau = tuning.T0 if ini.get("tau0") is None else float(ini["tau0"])
    thu_spec = ini.get("theta_u0")
    if isinstance(thu_spec, dict):
        lo, hi = thu_spec.get("uniform", [0.0, 1.0])
        rng = np.random.default_rng(thu_spec.get("seed", 0))
        thu = rng.uniform(lo, hi, size=l_c)
    elif thu_spec is None:
        thu = np.full(l_c, 0.5)
    else:
        thu = np.asarray(thu_spec, dtype=float)
    if x0.shape != (problem.plant.n,) or th.shape != (l_c,) or p.shape != (l_c,) or thu.shape != (l_c,):
        raise ConfigurationError("initial condition dimensions do not match the plant and basis")
    if tuning.mode == MOMENTUM and not (tuning.T0 <= tau <= tuning.T):
        raise ConfigurationError(f"initial timer {tau} outside [{tuning.T0}, {tuning.T}]")
    return ClosedLoopState(x0, CriticState(th, p, tau), thu)


def settling_time(t, err, radius: float) -> Optional[float]:
    """First stored time after which ``err`` stays strictly inside ``radius``; None if it never does."""
    err = np.asarray(err)
    outside = np.flatnonzero(~(err < radius))
    if outside.size == 0:
        return float(t[0])
    k = outside[-1] + 1
    return float(t[k]) if k < len(err) else None


def first_entry_time(t, err, radius: float) -> Optional[float]:
    """First stored time with ``err`` strictly inside ``radius``; None if never."""
    inside = np.flatnonzero(np.asarray(err) < radius)
    return float(t[inside[0]]) if inside.size else None


def fit_rate(t, err, floor: float = 1e-10) -> float:
    """Exponential rate from a least-squares fit of ``log err`` against time."""
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = err > floor
    if keep.sum() < 2:
        return math.nan
    slope = np.polyfit(t[keep], np.log(err[keep]), 1)[0]
    return float(-slope)


@dataclass
class RunResult:
    mode: str
    summary: Dict[str, Any]
    arc: HybridArc
    log: Optional[DiagnosticsLog]
    n: int
    l_c: int


def tuning_report(problem: Problem, tuning: CriticTuning) -> Dict[str, Any]:
    cert = problem.certificate
    report: Dict[str, Any] = {
        "lambda_min": cert.lambda_min,
        "lambda_max": cert.lambda_max,
        "rich": cert.rich,
    }
    if cert.lambda_min > 0:
        verdict = validate_tuning(tuning, cert.lambda_min)
        report.update(
            tuning_ok=verdict.ok,
            lower_gap=verdict.lower_gap,
            upper_gap=verdict.upper_gap,
            excitation_gap=verdict.excitation_gap,
            T_star=optimal_restart_period(tuning.k_c, tuning.rho_d, cert.lambda_min, tuning.T0),
            eta=jump_decrease_factor(tuning, cert.lambda_min),
            M_T_min_eig=float(np.linalg.eigvalsh(decrease_matrix(tuning.T, tuning, cert.lambda_min))[0]),
        )
    else:
        report.update(tuning_ok=False)
    return report


def run_experiment(cfg: dict, mode: str, problem: Optional[Problem] = None, out_dir=None) -> RunResult:
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}")
    problem = problem or resolve_problem(cfg)
    tuning = critic_tuning(cfg, mode)
    report = tuning_report(problem, tuning)
    forced = bool(cfg.get("force", False))
    if not report["tuning_ok"] and not forced:
        raise ValidationFailed(
            "tuning does not satisfy the richness/restart inequalities; rerun with --force to override"
        )
    spec = build_closed_loop(
        problem.plant, problem.cost, problem.basis, problem.reg, problem.dataset, tuning, actor_tuning(cfg),
        richness_floor=problem.certificate.richness_floor,
    )
    z0 = initial_state(cfg, problem, tuning)
    star = problem.theta_c_star
    target = TargetSet(star, tuning.T0, tuning.T) if star is not None else None
    log.info("running %s to t=%s", mode, cfg["integrator"]["t_max"])
    arc, diag = simulate_closed_loop(spec, z0, integrator_config(cfg), diagnostics=target is not None,
                                     target=target, ref=problem.ref)

    final = spec.unpack(arc.final_state)
    summary: Dict[str, Any] = {"mode": mode, "forced": forced and not report["tuning_ok"]}
    summary.update(report)
    summary.update(
        t_final=arc.final_stamp.t,
        jump_count=len(arc.jump_stamps),
        final_x_norm=float(np.linalg.norm(final.x)),
    )
    if target is not None:
        err_inf = np.max(np.abs(arc.states[:, spec.n : spec.n + spec.l_c] - star), axis=1)
        summary.update(
            final_theta_c_error_inf=float(err_inf[-1]),
            final_theta_c_error=float(diag.theta_c_err[-1]),
            final_theta_u_error=float(diag.theta_u_err[-1]),
            final_dist_A=float(diag.dist_A[-1]),
            settling_time=settling_time(arc.times, diag.theta_c_err, float(cfg["settle_radius"])),
            first_entry_time=first_entry_time(arc.times, diag.theta_c_err, float(cfg["settle_radius"])),
            rate=fit_rate(arc.times, diag.theta_c_err),
        )
    result = RunResult(mode, summary, arc, diag, spec.n, spec.l_c)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / f"trajectory_{mode}.csv", result)
        write_json(out / f"summary_{mode}.json", summary)
    return result


def compare_modes(results: Dict[str, RunResult]) -> Dict[str, Any]:
    s_m = results[MOMENTUM].summary.get("settling_time")
    s_b = results[BASELINE].summary.get("settling_time")
    key_m = math.inf if s_m is None else s_m
    key_b = math.inf if s_b is None else s_b
    return {
        "settling_time_momentum": s_m,
        "settling_time_baseline": s_b,
        "momentum_faster": key_m < key_b,
    }


# --- file formats -------------------------------------------------------


def trajectory_header(n: int, l_c: int) -> List[str]:
    return (
        ["t", "j"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"thc{i + 1}" for i in range(l_c)]
        + [f"p{i + 1}" for i in range(l_c)]
        + ["tau"]
        + [f"thu{i + 1}" for i in range(l_c)]
        + ["Vc", "Vfull", "dist_A", "hjb_residual"]
    )


def write_trajectory_csv(path, result: RunResult) -> None:
    diag = result.log
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(result.n, result.l_c))
        for k, (stamp, z) in enumerate(result.arc.samples):
            if diag is not None:
                extra = [diag.Vc[k], diag.Vfull[k], diag.dist_A[k], diag.hjb_residual[k]]
            else:
                extra = [math.nan] * 4
            w.writerow([repr(float(stamp.t)), stamp.j] + [repr(float(v)) for v in z] + [repr(float(v)) for v in extra])


def read_trajectory_csv(path):
    """Return ``(header, t, j, states, diagnostics)`` from a trajectory file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    t = np.array([float(r[0]) for r in body])
    j = np.array([int(r[1]) for r in body], dtype=int)
    vals = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), len(header) - 2)
    return header, t, j, vals[:, :-4], vals[:, -4:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True))


# --- sweeps ---------------------------------------------------------------


def _sweep_setting(cfg: dict, problem: Problem, variable: str, value):
    """Config and problem for one sweep point; ``value`` may be ``"T*"`` for the restart period."""
    cfg = copy.deepcopy(cfg)
    if variable == "lambda":
        sub = problem.dataset.subset(value)
        cert = certify_richness(sub, problem.certificate.richness_floor)
        problem = Problem(problem.plant, problem.cost, problem.ref, problem.basis, problem.reg, sub, cert,
                          problem.theta_c_star)
        return cfg, problem, list(value)
    if variable == "T" and value == "T*":
        c = cfg["critic"]
        value = optimal_restart_period(c["k_c"], c["rho_d"], problem.certificate.lambda_min, c["T0"])
    cfg["critic"][variable] = float(value)
    return cfg, problem, float(value)


def run_sweep(cfg: dict, variable: str, values, modes=None, workers: int = 1, problem=None):
    """One row per (value, mode): final error, settling time and fitted rate."""
    if variable not in SWEEP_VARIABLES:
        raise UsageError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {variable!r}")
    values = list(values or [])
    if not values:
        raise UsageError("sweep needs at least one value")
    problem = problem or resolve_problem(cfg)
    if modes is None:
        modes = list(MODES) if cfg["mode"] == "both" else [cfg["mode"]]
    jobs = []
    for v in values:
        s_cfg, s_problem, resolved = _sweep_setting(cfg, problem, variable, v)
        for mode in modes:
            jobs.append((s_cfg, s_problem, resolved, mode))

    def work(job):
        s_cfg, s_problem, resolved, mode = job
        res = run_experiment(s_cfg, mode, problem=s_problem)
        s = res.summary
        return {
            "variable": variable,
            "value": resolved,
            "mode": mode,
            "lambda_min": s["lambda_min"],
            "final_error": s.get("final_theta_c_error_inf"),
            "settling_time": s.get("settling_time"),
            "rate": s.get("rate"),
            "tuning_ok": s["tuning_ok"],
        }, res

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        out = list(pool.map(work, jobs))
    return [row for row, _ in out], [res for _, res in out]


def write_sweep_csv(path, rows) -> None:
    cols = ["variable", "value", "mode", "lambda_min", "final_error", "settling_time", "rate", "tuning_ok"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            r = dict(r)
            if isinstance(r["value"], list):
                r["value"] = " ".join(str(i) for i in r["value"])
            w.writerow({k: ("" if r[k] is None else r[k]) for k in cols})
