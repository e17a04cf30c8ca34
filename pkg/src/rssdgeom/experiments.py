"""Benchmark harness: the four study modes plus scenario validation.

Every mode produces a table of rows (list of dicts sharing a fixed header)
that serializes to CSV. Rows never contain wall-clock timing so that two runs
with identical seeds are byte-identical; timing is reported on the result
object for console summaries. Placements are embedded in each row (degrees,
six decimals, semicolon-separated) so any row can be re-scored offline.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .admm import AdmmOptions, optimize, uniform_init
from .estimator import mle_estimate
from .fim import coupling_matrix, fim_full, g0_bound, noise_weights
from .model import (
    Placement,
    Scenario,
    ScenarioError,
    SourceParams,
    load_scenario,
    scenario_to_dict,
    sensor_positions,
    simulate_measurements,
)

HEADERS = {
    "optimize": [
        "beta_max_deg", "lb_rmse_uniform_m", "lb_rmse_opt_m", "improvement_pct",
        "iterations", "converged", "mean_inner_iters",
        "placement_deg", "scenario_hash", "seed",
    ],
    "convergence": [
        "beta_max_deg", "iter", "lb_rmse_m", "objective", "inner_iters",
        "placement_deg", "scenario_hash", "seed",
    ],
    "sweep-n": [
        "n", "beta_max_deg", "lb_rmse_uniform_m", "lb_rmse_opt_m", "improvement_pct",
        "placement_deg", "scenario_hash", "seed",
    ],
    "sweep-angle": [
        "beta_max_deg", "lb_rmse_uniform_m", "lb_rmse_opt_m", "improvement_pct",
        "placement_deg", "scenario_hash", "seed",
    ],
    "practical": [
        "trial", "prior_err_m", "prior_x_m", "prior_y_m",
        "lb_rmse_theoretical_m", "lb_rmse_practical_m", "empirical_rmse_m",
        "placement_deg", "scenario_hash", "seed",
    ],
}


@dataclass
class RunResult:
    """Rows plus run metadata for one experiment mode."""

    mode: str
    header: list
    rows: list
    converged_all: bool
    elapsed_s: float
    summary: dict = field(default_factory=dict)


def scenario_hash(scenario: Scenario) -> str:
    """Stable 12-hex-digit digest of the scenario content."""
    canon = json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def placement_to_field(placement: Placement) -> str:
    """Angles in degrees, six decimals, semicolon-separated."""
    return ";".join(f"{math.degrees(a):.6f}" for a in placement.angles)


def placement_from_field(text: str) -> Placement:
    return Placement.from_angles([math.radians(float(s)) for s in text.split(";")])


def write_csv(result: RunResult, path) -> None:
    lines = [",".join(result.header)]
    for row in result.rows:
        lines.append(",".join(_fmt(row[col]) for col in result.header))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _parallel_map(fn, items):
    """Bounded worker pool preserving input order (safe: jobs are pure)."""
    if len(items) <= 1:
        return [fn(x) for x in items]
    workers = min(len(items), os.cpu_count() or 1, 8)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _improvement_pct(lb_uniform: float, lb_opt: float) -> float:
    return 100.0 * (1.0 - lb_opt / lb_uniform)


# -- study modes --------------------------------------------------------------


def run_convergence(
    scenario: Scenario, beta_max_list, options: AdmmOptions = None, seed: int = 0
) -> RunResult:
    """Per-iteration LB-RMSE trace for each spread bound in the list."""
    t0 = time.perf_counter()
    options = options or AdmmOptions()
    shash = scenario_hash(scenario)

    def one(beta_max):
        sc = replace(scenario, beta_max=beta_max)
        placement, trace = optimize(sc, options=options)
        return sc, placement, trace

    results = _parallel_map(one, [float(b) for b in beta_max_list])
    rows = []
    converged_all = True
    mean_inner = {}
    for sc, placement, trace in results:
        converged_all &= trace.converged
        deg = math.degrees(sc.beta_max)
        mean_inner[_fmt(deg)] = trace.mean_inner
        for rec in trace.records:
            rows.append(
                {
                    "beta_max_deg": deg,
                    "iter": rec.k,
                    "lb_rmse_m": rec.lb_rmse,
                    "objective": rec.objective,
                    "inner_iters": rec.inner_iters,
                    "placement_deg": placement_to_field(Placement.from_angles(rec.angles)),
                    "scenario_hash": shash,
                    "seed": seed,
                }
            )
    return RunResult(
        mode="convergence",
        header=HEADERS["convergence"],
        rows=rows,
        converged_all=converged_all,
        elapsed_s=time.perf_counter() - t0,
        summary={"mean_inner_iters": mean_inner},
    )


def resize_sensors(template: Scenario, n: int) -> Scenario:
    """Scale a scenario's sensor count, preserving its noise structure.

    Two-level noise patterns (constant first half / constant second half)
    keep their fifty-fifty split; fully constant vectors broadcast; anything
    else is tiled cyclically. Distances follow the same rule.
    """
    if n < 2:
        raise ScenarioError("resize_sensors: need n >= 2")

    def stretch(vec: np.ndarray) -> np.ndarray:
        m = len(vec)
        if np.all(vec == vec[0]):
            return np.full(n, vec[0])
        half = m // 2
        if (
            m % 2 == 0
            and n % 2 == 0
            and np.all(vec[:half] == vec[0])
            and np.all(vec[half:] == vec[half])
        ):
            return np.array([vec[0]] * (n // 2) + [vec[half]] * (n // 2))
        return np.resize(vec, n)

    return replace(
        template,
        n_sensors=n,
        horiz_dist=stretch(template.horiz_dist),
        vert_dist=stretch(template.vert_dist),
        noise_std=stretch(template.noise_std),
    )


def run_sweep_n(
    scenario_template: Scenario,
    n_list,
    beta_max_list,
    options: AdmmOptions = None,
    seed: int = 0,
) -> RunResult:
    """Uniform vs optimized LB-RMSE across swarm sizes and spread bounds."""
    t0 = time.perf_counter()
    options = options or AdmmOptions()
    jobs = []
    for n in n_list:
        if int(n) < 3:
            raise ScenarioError(f"sweep-n: need n >= 3, got {n}")
        for beta_max in beta_max_list:
            jobs.append((int(n), float(beta_max)))

    def one(job):
        n, beta_max = job
        sc = replace(resize_sensors(scenario_template, n), beta_max=beta_max)
        placement, trace = optimize(sc, options=options)
        lb_u = trace.records[0].lb_rmse
        lb_o = min(rec.lb_rmse for rec in trace.records)
        return sc, n, beta_max, placement, trace, lb_u, lb_o

    rows = []
    converged_all = True
    for sc, n, beta_max, placement, trace, lb_u, lb_o in _parallel_map(one, jobs):
        converged_all &= trace.converged
        rows.append(
            {
                "n": n,
                "beta_max_deg": math.degrees(beta_max),
                "lb_rmse_uniform_m": lb_u,
                "lb_rmse_opt_m": lb_o,
                "improvement_pct": _improvement_pct(lb_u, lb_o),
                "placement_deg": placement_to_field(placement),
                "scenario_hash": scenario_hash(sc),
                "seed": seed,
            }
        )
    return RunResult(
        mode="sweep-n",
        header=HEADERS["sweep-n"],
        rows=rows,
        converged_all=converged_all,
        elapsed_s=time.perf_counter() - t0,
    )


def run_sweep_angle(
    scenario: Scenario, beta_grid, options: AdmmOptions = None, seed: int = 0
) -> RunResult:
    """Uniform vs optimized LB-RMSE across a grid of spread bounds."""
    t0 = time.perf_counter()
    options = options or AdmmOptions()
    grid = [float(b) for b in beta_grid]
    if any(not 0.0 < b <= 2 * math.pi + 1e-12 for b in grid):
        raise ScenarioError("sweep-angle: grid values must lie in (0, 2*pi]")
    shash = scenario_hash(scenario)

    def one(beta_max):
        sc = replace(scenario, beta_max=beta_max)
        placement, trace = optimize(sc, options=options)
        lb_u = trace.records[0].lb_rmse
        lb_o = min(rec.lb_rmse for rec in trace.records)
        return beta_max, placement, trace, lb_u, lb_o

    rows = []
    converged_all = True
    for beta_max, placement, trace, lb_u, lb_o in _parallel_map(one, grid):
        converged_all &= trace.converged
        rows.append(
            {
                "beta_max_deg": math.degrees(beta_max),
                "lb_rmse_uniform_m": lb_u,
                "lb_rmse_opt_m": lb_o,
                "improvement_pct": _improvement_pct(lb_u, lb_o),
                "placement_deg": placement_to_field(placement),
                "scenario_hash": shash,
                "seed": seed,
            }
        )
    return RunResult(
        mode="sweep-angle",
        header=HEADERS["sweep-angle"],
        rows=rows,
        converged_all=converged_all,
        elapsed_s=time.perf_counter() - t0,
    )


def run_practical(
    scenario: Scenario,
    prior_std: float,
    trials: int,
    seed: int = 0,
    options: AdmmOptions = None,
    truth_p0: float = 0.0,
    refine: bool = True,
) -> RunResult:
    """Optimize around noisy prior positions and score against the truth.

    Per trial: draw a Gaussian prior error, design the placement around the
    perturbed prior, evaluate its LB-RMSE at the true source, and (when
    refine is set) simulate measurements and refine the prior by maximum
    likelihood. A final aggregate row (trial = -1) carries the means and the
    empirical refinement RMSE.
    """
    t0 = time.perf_counter()
    if trials < 1:
        raise ScenarioError("practical: need trials >= 1")
    if prior_std < 0:
        raise ScenarioError("practical: prior_std must be >= 0")
    options = options or AdmmOptions()
    shash = scenario_hash(scenario)
    truth = SourceParams(p0=truth_p0, position=scenario.source[:2])

    theory_placement, theory_trace = optimize(scenario, options=options)
    lb_theory = min(rec.lb_rmse for rec in theory_trace.records)

    def one(t):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t, 0)))
        err = rng.normal(0.0, prior_std, size=2)
        prior_pos = truth.position + err
        sc_prior = scenario.with_source(prior_pos)
        guess = SourceParams(p0=truth_p0, position=prior_pos)
        placement, trace = optimize(sc_prior, source_guess=guess, options=options)
        lb_practical = fim_full(sc_prior, placement, truth).lb_rmse
        emp_err = math.nan
        if refine:
            meas_seed = int(
                np.random.SeedSequence(seed, spawn_key=(t, 1)).generate_state(1)[0]
            )
            measurements = simulate_measurements(sc_prior, placement, truth, meas_seed)
            pos = sensor_positions(sc_prior, placement)
            result = mle_estimate(
                measurements,
                pos,
                np.sqrt(scenario.effective_var),
                scenario.gamma,
                init=guess,
                multistart_spread=2.0 * prior_std,
            )
            emp_err = float(np.linalg.norm(result.theta_hat[1:] - truth.position))
        return t, err, prior_pos, placement, trace, lb_practical, emp_err

    results = _parallel_map(one, list(range(trials)))
    rows = []
    converged_all = theory_trace.converged
    for t, err, prior_pos, placement, trace, lb_practical, emp_err in results:
        converged_all &= trace.converged
        rows.append(
            {
                "trial": t,
                "prior_err_m": float(np.linalg.norm(err)),
                "prior_x_m": float(prior_pos[0]),
                "prior_y_m": float(prior_pos[1]),
                "lb_rmse_theoretical_m": lb_theory,
                "lb_rmse_practical_m": lb_practical,
                "empirical_rmse_m": emp_err,
                "placement_deg": placement_to_field(placement),
                "scenario_hash": shash,
                "seed": seed,
            }
        )
    lb_vals = [r["lb_rmse_practical_m"] for r in rows]
    emp_sq = [r["empirical_rmse_m"] ** 2 for r in rows if math.isfinite(r["empirical_rmse_m"])]
    rows.append(
        {
            "trial": -1,
            "prior_err_m": float(np.mean([r["prior_err_m"] for r in rows])),
            "prior_x_m": 0.0,
            "prior_y_m": 0.0,
            "lb_rmse_theoretical_m": lb_theory,
            "lb_rmse_practical_m": float(np.mean(lb_vals)),
            "empirical_rmse_m": math.sqrt(float(np.mean(emp_sq))) if emp_sq else math.nan,
            "placement_deg": placement_to_field(theory_placement),
            "scenario_hash": shash,
            "seed": seed,
        }
    )
    return RunResult(
        mode="practical",
        header=HEADERS["practical"],
        rows=rows,
        converged_all=converged_all,
        elapsed_s=time.perf_counter() - t0,
        summary={
            "lb_rmse_theoretical_m": lb_theory,
            "lb_rmse_practical_mean_m": float(np.mean(lb_vals)),
        },
    )


def run_optimize(scenario: Scenario, options: AdmmOptions = None, seed: int = 0) -> RunResult:
    """Single optimization run summarized as one row."""
    t0 = time.perf_counter()
    options = options or AdmmOptions()
    placement, trace = optimize(scenario, options=options)
    lb_u = trace.records[0].lb_rmse
    lb_o = min(rec.lb_rmse for rec in trace.records)
    row = {
        "beta_max_deg": math.degrees(scenario.beta_max),
        "lb_rmse_uniform_m": lb_u,
        "lb_rmse_opt_m": lb_o,
        "improvement_pct": _improvement_pct(lb_u, lb_o),
        "iterations": trace.outer_iters,
        "converged": trace.converged,
        "mean_inner_iters": trace.mean_inner,
        "placement_deg": placement_to_field(placement),
        "scenario_hash": scenario_hash(scenario),
        "seed": seed,
    }
    return RunResult(
        mode="optimize",
        header=HEADERS["optimize"],
        rows=[row],
        converged_all=trace.converged,
        elapsed_s=time.perf_counter() - t0,
    )


# -- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    message: str
    details: dict = field(default_factory=dict)


def validate_scenario(path) -> ValidationReport:
    """Parse a scenario file, check invariants, and derive key quantities."""
    try:
        scenario = load_scenario(path)
    except (ScenarioError, OSError) as exc:
        return ValidationReport(ok=False, message=str(exc))
    weights = noise_weights(scenario)
    coupling = coupling_matrix(weights, scenario.variant)
    bound = g0_bound(scenario.beta_max)
    rank = int(np.linalg.matrix_rank(coupling.b, tol=1e-12))
    lb_u = fim_full(
        scenario,
        uniform_init(scenario.n_sensors, scenario.beta_max),
        SourceParams(0.0, scenario.source[:2]),
    ).lb_rmse
    details = {
        "n_sensors": scenario.n_sensors,
        "variant": scenario.variant.value,
        "weights": [float(w) for w in weights.w],
        "mean_inv_var": weights.mean_inv_var,
        "g0": [float(x) for x in bound.g0],
        "coupling_rank": rank,
        "beta_max_deg": math.degrees(scenario.beta_max),
        "lb_rmse_uniform_m": lb_u,
        "scenario_hash": scenario_hash(scenario),
    }
    return ValidationReport(ok=True, message="scenario valid", details=details)
