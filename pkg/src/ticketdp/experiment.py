"""Benchmark grid expansion, execution and raw-result persistence.

A *cell* is one scenario x environment pair; it contains one oracle case
(policy solved on the true curve) and five proxy cases (policy solved on a
misspecified curve).  Every case in a cell is simulated under the true
curve with the same per-run uniform streams, so revenue differences within
a cell are policy differences, not sampling noise.

Raw per-run revenues are persisted (not just summaries) so metrics and
paired tests can be recomputed without re-simulation.  All data files are
deterministic functions of (config, master seed); wall-clock timings go to
a separate file that is excluded from that guarantee.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import scenarios as sc
from .demand import (DEFAULT_HORIZON, DEFAULT_PRICE_LEVELS, DEFAULT_RAMP_WINDOW,
                     DEFAULT_MODERATE_COEFF, DEFAULT_STRONG_COEFF, DEADLINE_KINDS,
                     Environment, PriceGrid, regime_from_kind, validate_environment)
from .dp import PolicyTable, policies_distinct, solve_dp
from .simulate import _simulate, run_uniforms

RESULTS_FILE = "results.csv"
CASES_FILE = "cases.csv"
MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.json"
TIMINGS_FILE = "timings.csv"
TRAJECTORIES_FILE = "trajectories.csv"

DEFAULT_ETA_LEVELS = (0.0075, 0.0100, 0.0130)
DEFAULT_Q_LEVELS = (500, 700, 900)


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything that determines a benchmark run, seed included."""

    eta_levels: tuple[float, ...] = DEFAULT_ETA_LEVELS
    q_levels: tuple[int, ...] = DEFAULT_Q_LEVELS
    deadline_regimes: tuple[str, ...] = DEADLINE_KINDS
    runs: int = 3000
    master_seed: int = 12345
    horizon_t: int = DEFAULT_HORIZON
    price_levels: tuple[float, ...] = DEFAULT_PRICE_LEVELS
    ramp_window: int = DEFAULT_RAMP_WINDOW
    moderate_coeff: float = DEFAULT_MODERATE_COEFF
    strong_coeff: float = DEFAULT_STRONG_COEFF
    mass_ratio: float = sc.DEFAULT_MASS_RATIO
    scenario_ids: tuple[str, ...] | None = None
    manifest_path: str | None = None
    out_dir: str | None = None
    dump_trajectories: bool = False
    workers: int = 1

    def __post_init__(self):
        for name in ("eta_levels", "q_levels", "deadline_regimes", "price_levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.scenario_ids is not None:
            object.__setattr__(self, "scenario_ids", tuple(self.scenario_ids))

    @property
    def target_mass(self) -> float:
        return sc.default_target_mass(self.price_levels, self.eta_levels,
                                      self.q_levels, self.mass_ratio)

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("eta_levels", "q_levels", "deadline_regimes", "price_levels",
                     "scenario_ids"):
            if d[name] is not None:
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


def desk_preset(**overrides) -> BenchmarkConfig:
    """Minutes-scale grid: fewer runs, smaller inventories, shorter horizon."""
    base = dict(runs=300, q_levels=(100, 140, 180), horizon_t=40)
    base.update(overrides)
    return BenchmarkConfig(**base)


def full_preset(**overrides) -> BenchmarkConfig:
    """The benchmark-scale grid (27 environments, 3000 runs)."""
    return BenchmarkConfig(**overrides)


def load_config(path) -> BenchmarkConfig:
    with open(path) as fh:
        return BenchmarkConfig.from_dict(json.load(fh))


def save_config(config: BenchmarkConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def validate_config(config: BenchmarkConfig) -> BenchmarkConfig:
    problems = []
    for name in ("eta_levels", "q_levels", "deadline_regimes"):
        if len(getattr(config, name)) == 0:
            problems.append(f"{name}: axis is empty")
    if any(e <= 0 for e in config.eta_levels):
        problems.append("eta_levels: must all be positive")
    if any(q <= 0 for q in config.q_levels):
        problems.append("q_levels: must all be positive")
    for kind in config.deadline_regimes:
        if kind not in DEADLINE_KINDS:
            problems.append(f"deadline_regimes: unknown kind {kind!r}")
    if config.runs < 1:
        problems.append("runs: must be >= 1")
    if config.horizon_t < 1:
        problems.append("horizon_t: must be >= 1")
    problems.extend(PriceGrid(config.price_levels).violations())
    if config.workers < 1:
        problems.append("workers: must be >= 1")
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    if config.scenario_ids is not None:
        known = {s.scenario_id for s in _all_scenarios(config)}
        missing = [s for s in config.scenario_ids if s not in known]
        if missing:
            raise ValueError(f"invalid config: unknown scenario ids {missing}")
    return config


def _all_scenarios(config: BenchmarkConfig) -> list[sc.ScenarioSpec]:
    if config.manifest_path:
        specs, horizon, _ = sc.read_manifest(config.manifest_path)
        if horizon != config.horizon_t:
            raise ValueError(
                f"manifest horizon {horizon} does not match config horizon "
                f"{config.horizon_t}")
        return specs
    return sc.default_scenarios(config.horizon_t)


def benchmark_scenarios(config: BenchmarkConfig) -> list[sc.ScenarioSpec]:
    """Scenario specs from the manifest if configured, else the defaults."""
    specs = _all_scenarios(config)
    if config.scenario_ids is not None:
        wanted = set(config.scenario_ids)
        specs = [s for s in specs if s.scenario_id in wanted]
    return specs


def env_identifier(eta: float, kind: str, q: int) -> str:
    """Value-based id, stable under reordering of the config axes."""
    return f"eta{eta:g}-{kind}-q{q}"


def environments(config: BenchmarkConfig) -> list[tuple[str, Environment]]:
    grid = PriceGrid(config.price_levels)
    out = []
    for eta in config.eta_levels:
        for kind in config.deadline_regimes:
            regime = regime_from_kind(kind, config.ramp_window,
                                      config.moderate_coeff, config.strong_coeff)
            for q in config.q_levels:
                env = Environment(eta, regime, q, config.horizon_t, grid)
                validate_environment(env)
                out.append((env_identifier(eta, kind, q), env))
    return out


@dataclass(frozen=True)
class BenchmarkCase:
    """One (scenario, profile-under-test, environment) triple."""

    scenario_id: str
    label: str
    is_oracle: bool
    error_type: str | None
    misspec: sc.MisspecSpec | None
    spec: sc.ScenarioSpec
    env_id: str
    env: Environment


@dataclass
class CaseResult:
    scenario_id: str
    label: str
    env_id: str
    is_oracle: bool
    error_type: str | None
    eta: float
    deadline_regime: str
    inventory_q: int
    revenues: np.ndarray
    solve_seconds: float
    simulate_seconds: float
    policy_distinct: bool | None = None


def expand_grid(config: BenchmarkConfig) -> list[BenchmarkCase]:
    """Cartesian product of scenarios, profiles under test and environments.

    Ordered scenario-major, then environment, then oracle before proxies, so
    the raw-result row order is reproducible.
    """
    validate_config(config)
    specs = benchmark_scenarios(config)
    envs = environments(config)
    cases = []
    for spec in specs:
        for env_id, env in envs:
            cases.append(BenchmarkCase(spec.scenario_id, spec.scenario_id, True,
                                       None, None, spec, env_id, env))
            for m in spec.misspecs:
                cases.append(BenchmarkCase(spec.scenario_id, sc.misspec_label(spec, m),
                                           False, m.error_type, m, spec, env_id, env))
    return cases


def count_cases(config: BenchmarkConfig) -> tuple[int, int]:
    """(oracle cases, non-oracle cases) implied by the config."""
    specs = benchmark_scenarios(config)
    n_envs = (len(config.eta_levels) * len(config.deadline_regimes)
              * len(config.q_levels))
    return len(specs) * n_envs, sum(len(s.misspecs) for s in specs) * n_envs


def _case_profile(case: BenchmarkCase, config: BenchmarkConfig):
    if case.is_oracle:
        return sc.build_scenario(case.spec, config.horizon_t, config.target_mass)
    return sc.apply_misspecification(case.spec, case.misspec, config.horizon_t,
                                     config.target_mass)


def run_case(case: BenchmarkCase, config: BenchmarkConfig,
             uniforms: np.ndarray | None = None,
             record_trajectories: bool = False) -> tuple[CaseResult, PolicyTable, dict | None]:
    """Solve the case's policy and simulate it under the true curve.

    The uniforms derive from (master_seed, scenario, env, run) only, so every
    case in a cell consumes identical streams.
    """
    true_profile = sc.build_scenario(case.spec, config.horizon_t, config.target_mass)
    policy_profile = _case_profile(case, config)
    if uniforms is None:
        uniforms = run_uniforms(config.master_seed, case.scenario_id, case.env_id,
                                config.runs, config.horizon_t + 1)
    t0 = time.perf_counter()
    _, policy = solve_dp(policy_profile, case.env)
    t1 = time.perf_counter()
    revenues, rec = _simulate(policy, true_profile, case.env, uniforms,
                              record=record_trajectories)
    t2 = time.perf_counter()
    result = CaseResult(case.scenario_id, case.label, case.env_id, case.is_oracle,
                        case.error_type, case.env.eta, case.env.deadline.kind,
                        case.env.inventory_q, revenues, t1 - t0, t2 - t1)
    return result, policy, rec


def _run_cell(args):
    """Worker for one scenario x environment cell; failures stay per-case."""
    spec, env_id, env, config = args
    cell_config = replace(config, scenario_ids=(spec.scenario_id,))
    cell_cases = [c for c in expand_grid(cell_config) if c.env_id == env_id]
    uniforms = run_uniforms(config.master_seed, spec.scenario_id, env_id,
                            config.runs, config.horizon_t + 1)
    results, failures, trajectories = [], [], []
    oracle_policy = None
    for case in cell_cases:
        try:
            result, policy, rec = run_case(case, config, uniforms,
                                           record_trajectories=config.dump_trajectories)
        except Exception as exc:  # noqa: BLE001 - diagnostic, benchmark continues
            failures.append({"scenario": case.scenario_id, "label": case.label,
                             "env_id": env_id, "error": f"{type(exc).__name__}: {exc}"})
            continue
        if case.is_oracle:
            oracle_policy = policy
        elif oracle_policy is not None:
            result.policy_distinct = policies_distinct(oracle_policy, policy)
        results.append(result)
        if rec is not None:
            trajectories.append((case.scenario_id, case.label, env_id, rec))
    return results, failures, trajectories


def run_benchmark(config: BenchmarkConfig, out_dir=None, workers: int | None = None) -> dict:
    """Execute every case, persist raw revenues and provenance, return a summary.

    The mapping (config, master_seed) -> data files is pure; cells may run on
    several workers because outputs are reduced in case order.
    """
    validate_config(config)
    out = Path(out_dir if out_dir is not None else (config.out_dir or "ticketdp-results"))
    out.mkdir(parents=True, exist_ok=True)
    workers = workers if workers is not None else config.workers

    specs = benchmark_scenarios(config)
    envs = environments(config)
    tasks = [(spec, env_id, env, config) for spec in specs for env_id, env in envs]

    started = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cell_outputs = list(pool.map(_run_cell, tasks, chunksize=1))
    else:
        cell_outputs = [_run_cell(t) for t in tasks]
    elapsed = time.perf_counter() - started

    results, failures, trajectories = [], [], []
    for cell_results, cell_failures, cell_trajs in cell_outputs:
        results.extend(cell_results)
        failures.extend(cell_failures)
        trajectories.extend(cell_trajs)

    _write_result_files(out, config, specs, results, failures)
    if config.dump_trajectories:
        _write_trajectories(out, config, trajectories)

    n_oracle, n_proxy = count_cases(config)
    return {
        "out_dir": str(out),
        "cells": len(tasks),
        "cases_expected": n_oracle + n_proxy,
        "cases_completed": len(results),
        "dp_solves": len(results),
        "failures": failures,
        "wall_seconds": elapsed,
    }


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_result_files(out: Path, config: BenchmarkConfig, specs, results, failures) -> None:
    with open(out / RESULTS_FILE, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "label", "env_id", "run", "revenue"])
        for r in results:
            for m, rev in enumerate(r.revenues, start=1):
                wr.writerow([r.scenario_id, r.label, r.env_id, m, _fmt(rev)])

    with open(out / CASES_FILE, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "label", "env_id", "is_oracle", "error_type",
                     "eta", "deadline_regime", "inventory_q", "policy_distinct"])
        for r in results:
            wr.writerow([r.scenario_id, r.label, r.env_id,
                         "true" if r.is_oracle else "false",
                         r.error_type or "",
                         _fmt(r.eta), r.deadline_regime, r.inventory_q,
                         "" if r.policy_distinct is None
                         else ("true" if r.policy_distinct else "false")])

    # Wall-clock diagnostics only; excluded from the byte-reproducibility
    # guarantee that covers the files above.
    with open(out / TIMINGS_FILE, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "label", "env_id", "solve_seconds", "simulate_seconds"])
        for r in results:
            wr.writerow([r.scenario_id, r.label, r.env_id,
                         f"{r.solve_seconds:.6f}", f"{r.simulate_seconds:.6f}"])

    sc.write_manifest(out / MANIFEST_FILE, specs, config.horizon_t, config.target_mass)
    save_config(config, out / CONFIG_FILE)

    if failures:
        with open(out / "failures.json", "w") as fh:
            json.dump(failures, fh, indent=2)
            fh.write("\n")


def _write_trajectories(out: Path, config: BenchmarkConfig, trajectories) -> None:
    grid = np.asarray(config.price_levels)
    with open(out / TRAJECTORIES_FILE, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scenario", "label", "env_id", "run", "t", "price",
                     "demand", "sales", "inventory_after"])
        for scenario_id, label, env_id, rec in trajectories:
            n_runs, n_periods = rec["demand"].shape
            for m in range(n_runs):
                for t in range(n_periods):
                    wr.writerow([scenario_id, label, env_id, m + 1, t,
                                 _fmt(grid[rec["price_indices"][m, t]]),
                                 rec["demand"][m, t], rec["sales"][m, t],
                                 rec["inventory"][m, t + 1]])


def load_results(results_dir) -> tuple[pd.DataFrame, pd.DataFrame, dict, dict]:
    """Raw runs, case metadata, manifest and config back from a results dir."""
    d = Path(results_dir)
    # round_trip parsing: the writers emit 17 significant digits precisely so
    # every float survives the file round trip bit for bit.
    runs = pd.read_csv(d / RESULTS_FILE, dtype={"revenue": float},
                       float_precision="round_trip")
    cases = pd.read_csv(d / CASES_FILE,
                        dtype={"is_oracle": "string", "error_type": "string",
                               "policy_distinct": "string"},
                        keep_default_na=False, float_precision="round_trip")
    with open(d / MANIFEST_FILE) as fh:
        manifest = json.load(fh)
    with open(d / CONFIG_FILE) as fh:
        config = json.load(fh)
    return runs, cases, manifest, config
