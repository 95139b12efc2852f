"""Experiment runners: seeded sweeps, theorem verification, measure reports.

Every trial derives its seed from ``hash(master_seed, arm_index,
trial_index)``, so arms are independently reproducible and trials can run on
a process pool without affecting results. Output ordering is by (arm, trial)
regardless of completion order, and all emitted files are byte-deterministic
functions of (config, master seed); wall-clock timings go to a separate
sidecar that carries no scientific content.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import TrainingDivergedError
from .io import (load_decision_records, load_weight_stack, write_manifest,
                 write_records, write_summary_csv)
from .levels import generalization_gap, get_level, level_cost_and_gradient, make_family
from .linalg import norms
from .lqr import make_problem
from .measures import (WeightStack, margin_distribution, norm_products,
                       phi_frobenius_count, phi_l1_count, r_distance,
                       r_spectral_fro, r_spectral_l1)
from .one_step import OneStepParams, verify_theorem
from .policy import LayeredPolicy, TrainConfig, compose, init_policy, train
from .rng import SeededRng, derive_seed

__all__ = ["SweepRecord", "RunResult", "run_experiment", "write_run_outputs",
           "TEST_THETA_BASE"]

# Held-out levels are minted from a disjoint id range so they can never
# collide with training levels.
TEST_THETA_BASE = 1_000_000

_SUMMARY_FIELDS = [
    "arm_field", "arm_value", "trials", "clean", "diverged", "unstable_test_trials",
    "mean_gap", "std_gap", "mean_train_cost", "mean_test_cost",
    "mean_norm_spectral", "mean_norm_frobenius", "mean_norm_nuclear",
    "mean_phi_frobenius", "mean_phi_l1",
    "mean_prod_spectral", "mean_prod_frobenius", "mean_prod_nuclear",
]

_THEOREM_FIELDS = [
    "n", "p", "m", "psi", "trials", "empirical_mean", "std_error",
    "closed_form", "z_score", "within_3_sigma",
]

_MEASURES_FIELDS = [
    "depth", "phi_frobenius", "phi_l1", "prod_spectral", "prod_frobenius",
    "prod_nuclear", "prod_entrywise_l1", "r_spectral_l1", "r_distance",
    "r_spectral_fro", "margin_count", "margin_normalization", "margin_capacity",
    "margin_state_norm", "margin_denominator", "margin_mean", "margin_q25",
    "margin_median", "margin_q75",
]


@dataclass
class SweepRecord:
    """One trial's configuration echo and results; re-runnable from its fields."""

    experiment: str
    arm_field: str
    arm_value: int
    arm_index: int
    trial_index: int
    trial_seed: int
    settings: dict
    diverged: bool
    eta_halvings: int
    steps_run: int | None = None
    final_grad_norm: float | None = None
    train_cost: float | None = None
    test_cost: float | None = None
    gap: float | None = None
    unstable_train: int = 0
    unstable_test: int = 0
    norm_spectral: float | None = None
    norm_frobenius: float | None = None
    norm_nuclear: float | None = None
    norm_entrywise_l1: float | None = None
    phi_frobenius: float | None = None
    phi_l1: float | None = None
    prod_spectral: float | None = None
    prod_frobenius: float | None = None
    prod_nuclear: float | None = None
    prod_entrywise_l1: float | None = None
    wall_time_s: float = 0.0

    def to_output_dict(self) -> dict:
        # Wall time is excluded: record files must be byte-identical across
        # reruns of the same (config, master seed).
        d = asdict(self)
        d.pop("wall_time_s")
        return d

    @property
    def clean(self) -> bool:
        return (not self.diverged and self.unstable_train == 0
                and self.unstable_test == 0 and self.gap is not None
                and np.isfinite(self.gap))


def _layer_shapes(depth: int, n_out: int, obs_dim: int, width: int) -> list[tuple[int, int]]:
    if depth == 1:
        return [(n_out, obs_dim)]
    return [(n_out, width)] + [(width, width)] * (depth - 2) + [(width, obs_dim)]


def _mean_objective(levels, base) -> Callable:
    def objective(k):
        total_cost = 0.0
        total_grad = None
        for level in levels:
            ev, grad = level_cost_and_gradient(level, base, k)
            if not ev.stable:
                return float("inf"), None
            total_cost += ev.cost
            total_grad = grad if total_grad is None else total_grad + grad
        m = len(levels)
        return total_cost / m, total_grad / m
    return objective


def _run_policy_trial(spec: dict) -> SweepRecord:
    """Train one policy on one family and measure its generalization gap."""
    t0 = time.perf_counter()
    s = spec["settings"]
    trial_seed = derive_seed(spec["master_seed"], spec["arm_index"], spec["trial_index"])
    record = SweepRecord(
        experiment=spec["experiment"],
        arm_field=spec["arm_field"],
        arm_value=spec["arm_value"],
        arm_index=spec["arm_index"],
        trial_index=spec["trial_index"],
        trial_seed=trial_seed,
        settings=s,
        diverged=False,
        eta_halvings=0,
    )

    base = make_problem(SeededRng(derive_seed(trial_seed, "base")), s["n"], s["a_scale"])
    family = make_family(base, s["d_noise"], family_seed=derive_seed(trial_seed, "family"))
    levels = [get_level(family, theta) for theta in range(s["train_levels"])]
    shapes = _layer_shapes(s["depth"], s["n"], family.obs_dim, s["width"])
    objective = _mean_objective(levels, base)

    # Fixed step size, with one halved retry for trials whose iterates go
    # unstable; the halving is recorded so arms stay comparable.
    trained = None
    trace = None
    step_size = s["step_size"]
    for attempt in range(2):
        tcfg = TrainConfig(step_size=step_size, max_steps=s["max_steps"],
                           grad_tol=s["grad_tol"], init_scale=s["init_scale"],
                           init_kind=s["init_kind"])
        policy0 = init_policy(shapes, tcfg, SeededRng(derive_seed(trial_seed, "init")))
        try:
            trained, trace = train(policy0, objective, tcfg,
                                   log_interval=s["log_interval"])
            break
        except TrainingDivergedError:
            if attempt == 0:
                record.eta_halvings = 1
                step_size = step_size / 2
    if trained is None:
        record.diverged = True
        record.wall_time_s = time.perf_counter() - t0
        return record

    record.steps_run = trace[-1][0]
    record.final_grad_norm = trace[-1][2]
    k = compose(trained)
    gap = generalization_gap(
        family, k, range(s["train_levels"]),
        range(TEST_THETA_BASE, TEST_THETA_BASE + s["test_levels"]),
    )
    record.train_cost = gap.train_cost
    record.test_cost = gap.test_cost
    record.gap = gap.gap
    record.unstable_train = gap.unstable_train
    record.unstable_test = gap.unstable_test

    stack = WeightStack(layers=trained.layers)
    nk = norms(k)
    record.norm_spectral = nk.spectral
    record.norm_frobenius = nk.frobenius
    record.norm_nuclear = nk.nuclear
    record.norm_entrywise_l1 = nk.entrywise_l1
    record.phi_frobenius = phi_frobenius_count(stack)
    record.phi_l1 = phi_l1_count(stack)
    prods = norm_products(stack)
    record.prod_spectral = prods.spectral
    record.prod_frobenius = prods.frobenius
    record.prod_nuclear = prods.nuclear
    record.prod_entrywise_l1 = prods.entrywise_l1
    record.wall_time_s = time.perf_counter() - t0
    return record


def _arm_values(cfg: ExperimentConfig) -> tuple[str, Sequence[int]]:
    if cfg.kind == "sweep_noise":
        return "d_noise", cfg.sweep.d_noise
    if cfg.kind == "sweep_depth":
        return "depth", cfg.sweep.depths
    if cfg.kind == "sweep_width":
        return "width", cfg.sweep.widths
    if cfg.kind == "sweep_levels":
        return "train_levels", cfg.sweep.train_levels
    raise ValueError(f"{cfg.kind} is not a policy sweep")


def _trial_settings(cfg: ExperimentConfig, arm_field: str, arm_value: int) -> dict:
    s = {
        "n": cfg.base.n,
        "a_scale": cfg.base.a_scale,
        "d_noise": cfg.family.d_noise,
        "train_levels": cfg.family.train_levels,
        "test_levels": cfg.family.test_levels,
        "depth": cfg.policy.depth,
        "width": cfg.policy.width,
        "init_kind": cfg.policy.init_kind,
        "init_scale": cfg.policy.init_scale,
        "step_size": cfg.policy.step_size,
        "max_steps": cfg.policy.max_steps,
        "grad_tol": cfg.policy.grad_tol,
        "log_interval": cfg.policy.log_interval,
    }
    s[arm_field] = arm_value
    if cfg.kind == "sweep_width":
        s["depth"] = 2  # width arms are the hidden width of a two-layer policy
    return s


def _mean_or_none(values: list) -> float | None:
    return float(np.mean(values)) if values else None


def _summarize_arm(records: list[SweepRecord]) -> dict:
    clean = [r for r in records if r.clean]
    row = {
        "arm_field": records[0].arm_field,
        "arm_value": records[0].arm_value,
        "trials": len(records),
        "clean": len(clean),
        "diverged": sum(r.diverged for r in records),
        "unstable_test_trials": sum(
            1 for r in records if not r.diverged and r.unstable_test > 0
        ),
        "mean_gap": _mean_or_none([r.gap for r in clean]),
        "std_gap": (float(np.std([r.gap for r in clean], ddof=1))
                    if len(clean) >= 2 else None),
        "mean_train_cost": _mean_or_none([r.train_cost for r in clean]),
        "mean_test_cost": _mean_or_none([r.test_cost for r in clean]),
        "mean_norm_spectral": _mean_or_none([r.norm_spectral for r in clean]),
        "mean_norm_frobenius": _mean_or_none([r.norm_frobenius for r in clean]),
        "mean_norm_nuclear": _mean_or_none([r.norm_nuclear for r in clean]),
        "mean_phi_frobenius": _mean_or_none([r.phi_frobenius for r in clean]),
        "mean_phi_l1": _mean_or_none([r.phi_l1 for r in clean]),
        "mean_prod_spectral": _mean_or_none([r.prod_spectral for r in clean]),
        "mean_prod_frobenius": _mean_or_none([r.prod_frobenius for r in clean]),
        "mean_prod_nuclear": _mean_or_none([r.prod_nuclear for r in clean]),
    }
    return row


def _loglog_slope(xs: list[float], ys: list[float]) -> float | None:
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y is not None and y > 0]
    if len(pairs) < 2:
        return None
    lx = np.log([p[0] for p in pairs])
    ly = np.log([p[1] for p in pairs])
    slope = np.polyfit(lx, ly, 1)[0]
    return float(slope)


@dataclass
class RunResult:
    kind: str
    records: list
    summary_rows: list[dict]
    summary_fields: list[str]
    extras: dict
    timings: list[dict]


def _run_policy_sweep(cfg: ExperimentConfig, jobs: int) -> RunResult:
    arm_field, arm_values = _arm_values(cfg)
    specs = []
    for arm_index, arm_value in enumerate(arm_values):
        settings = _trial_settings(cfg, arm_field, arm_value)
        for trial_index in range(cfg.trials):
            specs.append({
                "experiment": cfg.kind,
                "arm_field": arm_field,
                "arm_value": arm_value,
                "arm_index": arm_index,
                "trial_index": trial_index,
                "master_seed": cfg.master_seed,
                "settings": settings,
            })
    records = _execute(_run_policy_trial, specs, jobs)

    summary_rows = []
    for arm_index in range(len(arm_values)):
        arm_records = [r for r in records if r.arm_index == arm_index]
        summary_rows.append(_summarize_arm(arm_records))

    extras: dict = {}
    if cfg.kind == "sweep_noise":
        extras["gap_vs_noise_loglog_slope"] = _loglog_slope(
            [row["arm_value"] for row in summary_rows],
            [row["mean_gap"] for row in summary_rows],
        )
    timings = [{"arm_index": r.arm_index, "trial_index": r.trial_index,
                "wall_time_s": r.wall_time_s} for r in records]
    return RunResult(kind=cfg.kind, records=records, summary_rows=summary_rows,
                     summary_fields=_SUMMARY_FIELDS, extras=extras, timings=timings)


def _run_theorem_cell(spec: dict) -> dict:
    t0 = time.perf_counter()
    params = OneStepParams(n=spec["n"], p=spec["p"], m=spec["m"], psi=spec["psi"])
    rng = SeededRng(derive_seed(spec["master_seed"], "theorem", spec["cell_index"]))
    check = verify_theorem(params, spec["trials"], rng)
    return {
        "cell_index": spec["cell_index"],
        "n": spec["n"],
        "p": spec["p"],
        "m": spec["m"],
        "psi": spec["psi"],
        "trials": spec["trials"],
        "empirical_mean": check.empirical_mean,
        "std_error": check.std_error,
        "closed_form": check.closed_form,
        "z_score": check.z_score,
        "within_3_sigma": bool(abs(check.z_score) <= 3.0),
        "wall_time_s": time.perf_counter() - t0,
    }


def _run_theorem_grid(cfg: ExperimentConfig, jobs: int) -> RunResult:
    cells = list(itertools.product(cfg.theorem.n, cfg.theorem.p, cfg.theorem.m,
                                   cfg.theorem.psi))
    specs = [{
        "cell_index": i, "n": n, "p": p, "m": m, "psi": psi,
        "trials": cfg.theorem.trials, "master_seed": cfg.master_seed,
    } for i, (n, p, m, psi) in enumerate(cells)]
    raw = _execute(_run_theorem_cell, specs, jobs)
    timings = [{"cell_index": r["cell_index"], "wall_time_s": r.pop("wall_time_s")}
               for r in raw]
    extras = {"cells_within_3_sigma": sum(r["within_3_sigma"] for r in raw),
              "cells_total": len(raw)}
    return RunResult(kind=cfg.kind, records=raw, summary_rows=raw,
                     summary_fields=_THEOREM_FIELDS, extras=extras, timings=timings)


def _run_measures_report(cfg: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    stack = load_weight_stack(cfg.measures.stack_path)
    l1_kind = cfg.measures.l1_kind
    prods = norm_products(stack)
    report: dict = {
        "stack_path": str(cfg.measures.stack_path),
        "depth": stack.depth,
        "shapes": [list(w.shape) for w in stack.layers],
        "has_init": stack.init is not None,
        "l1_kind": l1_kind,
        "phi_frobenius": phi_frobenius_count(stack),
        "phi_l1": phi_l1_count(stack, l1_kind=l1_kind),
        "prod_spectral": prods.spectral,
        "prod_frobenius": prods.frobenius,
        "prod_nuclear": prods.nuclear,
        "prod_entrywise_l1": prods.entrywise_l1,
        "r_spectral_l1": r_spectral_l1(stack, l1_kind=l1_kind),
        "r_distance": r_distance(stack) if stack.init else None,
        "r_spectral_fro": r_spectral_fro(stack) if stack.init else None,
        "margin_count": None,
        "margin_normalization": None,
        "margin_capacity": None,
        "margin_state_norm": None,
        "margin_denominator": None,
        "margin_mean": None,
        "margin_q25": None,
        "margin_median": None,
        "margin_q75": None,
    }
    if cfg.measures.records_path:
        decisions = load_decision_records(cfg.measures.records_path)
        margins = margin_distribution(decisions, stack,
                                      normalization=cfg.measures.normalization)
        report.update({
            "margin_count": len(decisions),
            "margin_normalization": margins.normalization,
            "margin_capacity": margins.capacity,
            "margin_state_norm": margins.state_norm,
            "margin_denominator": margins.denominator,
            "margin_mean": margins.mean,
            "margin_q25": margins.q25,
            "margin_median": margins.median,
            "margin_q75": margins.q75,
        })
    timings = [{"report": "measures", "wall_time_s": time.perf_counter() - t0}]
    return RunResult(kind=cfg.kind, records=[report], summary_rows=[report],
                     summary_fields=_MEASURES_FIELDS, extras={}, timings=timings)


def _execute(fn: Callable, specs: list[dict], jobs: int) -> list:
    if jobs <= 1 or len(specs) <= 1:
        return [fn(spec) for spec in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, specs))


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Execute the experiment selected by ``cfg.kind``."""
    if cfg.kind in ("sweep_noise", "sweep_depth", "sweep_width", "sweep_levels"):
        return _run_policy_sweep(cfg, jobs)
    if cfg.kind == "verify_theorem":
        return _run_theorem_grid(cfg, jobs)
    if cfg.kind == "measures_report":
        return _run_measures_report(cfg)
    raise ValueError(f"unknown experiment kind {cfg.kind!r}")


def write_run_outputs(result: RunResult, cfg: ExperimentConfig, out_dir) -> Path:
    """Write records.jsonl, summary.csv, run-manifest.json, timings.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record_dicts = [
        r.to_output_dict() if isinstance(r, SweepRecord) else dict(r)
        for r in result.records
    ]
    write_records(record_dicts, out / "records.jsonl")
    write_summary_csv(result.summary_rows, result.summary_fields, out / "summary.csv")
    write_manifest({
        "tool": "obslab",
        "version": __version__,
        "kind": cfg.kind,
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "records": len(result.records),
        **result.extras,
    }, out / "run-manifest.json")
    timing_fields = sorted({k for row in result.timings for k in row})
    write_summary_csv(result.timings, timing_fields, out / "timings.csv")
    return out
