"""Grid sweeps and Monte-Carlo experiments behind the fig6, fig7 and montecarlo commands.

Every sweep point is independent. Points run in a thread pool and come back
in grid order whatever order they finish in, so the CSV is identical for any
thread count.
"""

import logging
import math
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from voasim.attacks import masked_excess_noise
from voasim.channel import simulate_channel
from voasim.config import ScenarioConfig, parse_grid
from voasim.estimation import channel_params_from_estimates, estimate_ml, expected_channel_estimate
from voasim.export import FIG6_COLUMNS, SWEEP_ALL_COLUMNS, write_montecarlo, write_rows
from voasim.keyrate import evaluated_vs_practical
from voasim.models import (
    ChannelParams,
    FaultAttackScenario,
    MonteCarloSummary,
    ParameterError,
    UnphysicalEstimateError,
)
from voasim.monitor import corrected_key_rate, read_monitor, simulate_monitor_voltages
from voasim.units import distance_to_transmissivity

logger = logging.getLogger(__name__)

DEFAULT_EPS_LIST = (0.01, 0.03, 0.05)
DEFAULT_K_GRID = "1:25:1"
DEFAULT_DISTANCE_GRID = "40:160:2"
UNPHYSICAL_NOTE = "unphysical_estimate"
OVERESTIMATE_NOTE = "warning: K_e < K_p"
# Estimators are checked this many standard errors around their target.
STDERR_BAND = 5.0

Grid = tuple[float, ...]


def _ordered_map(fn: Callable, items: Iterable, threads: int) -> list:
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    items = list(items)
    if threads == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- fig6 ---


def run_fig6(
    eps_list: Iterable[float] = DEFAULT_EPS_LIST,
    k_grid: Iterable[float] | None = None,
    out: Path | None = None,
) -> list[dict]:
    """Observed excess noise eps/k for each true eps across the attenuation grid."""
    k_values = tuple(k_grid) if k_grid is not None else parse_grid(DEFAULT_K_GRID)
    if not k_values:
        raise ParameterError("k grid must not be empty")
    if any(not k >= 1 for k in k_values):
        raise ParameterError(f"k grid must lie in [1, inf), got {k_values}")
    rows = [
        {"k": k, "eps_true": eps, "eps_observed": masked_excess_noise(eps, 0.0, k)}
        for eps in eps_list
        for k in k_values
    ]
    if out is not None:
        write_rows(out, FIG6_COLUMNS, rows)
    return rows


# --- fig7 ---


def _fig7_axes(config: ScenarioConfig, grid: str | None) -> tuple[Grid, Grid, Grid]:
    eps_list, k_list = config.eps_list, config.k_list
    distances: Grid | None = None
    sweep = config.sweep
    if sweep is not None:
        if sweep.axis == "distance":
            distances = sweep.values
        elif sweep.axis == "k":
            k_list = sweep.values
        else:
            eps_list = sweep.values
    if grid is not None:
        distances = parse_grid(grid)
    if distances is None:
        distances = (config.distance_km,) if config.distance_km is not None else parse_grid(DEFAULT_DISTANCE_GRID)
    if any(not k >= 1 for k in k_list):
        raise ParameterError(f"k values must be >= 1, got {k_list}")
    return distances, eps_list, k_list


def _fig7_point(config: ScenarioConfig, distance_km: float, eps: float, k: float) -> dict:
    sys = config.sys
    u = config.scen.u
    row: dict = {"distance_km": distance_km, "k": k, "u": u, "eps_true": eps}
    true_ch = ChannelParams(distance_to_transmissivity(distance_km, config.fiber_loss_db_per_km), eps)
    scen = FaultAttackScenario(k=k, u=u)
    try:
        cmp = evaluated_vs_practical(true_ch, scen, sys, allow_small_m=config.allow_small_m)
        # The monitor reads k and k·V_A0 exactly in the analytic sweep.
        attacked = true_ch.with_intercept_resend(u)
        biased = expected_channel_estimate(
            sys.v_a0, k * attacked.t_trans, attacked.eps / k, sys, allow_small_m=config.allow_small_m
        )
        corrected = corrected_key_rate(biased, k, k * sys.v_a0, sys)
    except UnphysicalEstimateError as e:
        logger.warning("skipping d=%s km, eps=%s, k=%s: %s", distance_km, eps, k, e)
        nan = math.nan
        row.update(dict.fromkeys(("K_e", "K_p", "K_m", "i_ab", "s_be", "delta_n"), nan))
        row.update(dict.fromkeys(("K_e_clamped", "K_p_clamped", "K_m_clamped"), nan))
        row["note"] = UNPHYSICAL_NOTE
        return row

    evaluated = cmp.evaluated
    row.update(
        K_e=cmp.k_e,
        K_p=cmp.k_p,
        K_m=corrected.key_rate,
        i_ab=evaluated.i_ab,
        s_be=evaluated.s_be,
        delta_n=evaluated.delta_n,
        K_e_clamped=evaluated.clamped,
        K_p_clamped=cmp.practical.clamped,
        K_m_clamped=corrected.clamped,
        note="",
    )
    if cmp.k_e > 0 and cmp.k_p > 0 and cmp.k_e < cmp.k_p:
        row["note"] = OVERESTIMATE_NOTE
    return row


def run_fig7(
    config: ScenarioConfig,
    out: Path | None = None,
    *,
    threads: int = 1,
    grid: str | None = None,
) -> list[dict]:
    """Evaluated, practical and monitor-corrected key rates over distance for each (eps, k).

    Rows are ordered eps-major, then k, then distance.
    """
    distances, eps_list, k_list = _fig7_axes(config, grid)
    points = [(d, eps, k) for eps in eps_list for k in k_list for d in distances]
    logger.info("fig7: %d points on %d thread(s)", len(points), threads)
    rows = _ordered_map(lambda p: _fig7_point(config, *p), points, threads)
    if out is not None:
        write_rows(out, SWEEP_ALL_COLUMNS, rows)
    return rows


# --- Monte Carlo ---


def trial_seeds(seeds: tuple[int, ...], trials: int) -> tuple[int, ...]:
    """One seed per trial. A single base seed is expanded with SeedSequence."""
    if len(seeds) == 1:
        state = np.random.SeedSequence(seeds[0]).generate_state(trials, dtype=np.uint64)
        return tuple(int(s) for s in state)
    if len(seeds) < trials:
        raise ParameterError(f"seed exhaustion: {trials} trials need {trials} seeds, got {len(seeds)}")
    return tuple(seeds[:trials])


def _mean_stderr(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return float(arr.mean()), math.inf
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _numbered(rows: list[dict]) -> list[dict]:
    return [{"trial": i, **row} for i, row in enumerate(rows)]


def _within(value: float, target: float, stderr: float) -> bool:
    return abs(value - target) <= STDERR_BAND * stderr


def _masking_trial(config: ScenarioConfig, seed: int) -> dict:
    spec = config.montecarlo
    samples = simulate_channel(config.sys, config.channel, config.scen, spec.count, seed)
    ml = estimate_ml(samples)
    est = channel_params_from_estimates(ml, config.sys)
    m, t_hat, sigma2 = ml.m_used, ml.t_hat, ml.sigma2_hat
    noise = sigma2 - 1 - config.sys.nu_el
    # Delta-method spread of (sigma2 - floor) / t_hat².
    var_eps = (2 * sigma2**2 / m) / t_hat**4 + (2 * noise / t_hat**3) ** 2 * sigma2 / (m * ml.v_x)
    return {"trial_seed": seed, "eps_hat": est.eps_est, "stderr": math.sqrt(var_eps), "t_est": est.t_est}


def _coverage_trial(config: ScenarioConfig, seed: int, t_true: float, sigma2_true: float) -> dict:
    samples = simulate_channel(config.sys, config.channel, config.scen, config.montecarlo.count, seed)
    ml = estimate_ml(samples, config.sys.eps_pe, allow_small_m=config.allow_small_m)
    return {
        "trial_seed": seed,
        "t_hat": ml.t_hat,
        "sigma2_hat": ml.sigma2_hat,
        "delta_t": ml.delta_t,
        "delta_sigma2": ml.delta_sigma2,
        "t_covered": abs(ml.t_hat - t_true) <= ml.delta_t,
        "sigma2_covered": abs(ml.sigma2_hat - sigma2_true) <= ml.delta_sigma2,
    }


def _monitor_trial(config: ScenarioConfig, seed: int) -> dict:
    sys, cal = config.sys, config.calibration
    voltages = simulate_monitor_voltages(sys, config.scen, cal, config.montecarlo.count, seed)
    point = read_monitor(voltages, sys, cal)
    bound = read_monitor(voltages, sys, cal, eps_pe=sys.eps_pe)
    return {"trial_seed": seed, "k_hat": point.k_hat, "k_hat_corrected": bound.k_hat, "v_p": point.v_p}


def _summarize_masking(config: ScenarioConfig, rows: list[dict]) -> MonteCarloSummary:
    scen = config.scen
    target = masked_excess_noise(config.eps, scen.u, scen.k)
    mean, stderr = _mean_stderr([r["eps_hat"] for r in rows])
    for r in rows:
        r["within"] = _within(r["eps_hat"], target, r["stderr"])
    checks = {
        "mean_within_5_stderr": _within(mean, target, stderr),
        "all_trials_within_5_stderr": all(r["within"] for r in rows),
    }
    eps_alarm = config.montecarlo.eps_alarm
    if eps_alarm is not None:
        checks["attack_hidden"] = mean <= eps_alarm
    return MonteCarloSummary("masking", rows, mean, stderr, target, None, checks)


def _summarize_coverage(config: ScenarioConfig, rows: list[dict], t_true: float) -> MonteCarloSummary:
    expected = 1 - config.sys.eps_pe
    # Binomial band; at 1000 trials and eps_pe = 0.05 this is about [0.93, 0.97].
    tol = max(0.02, 3 * math.sqrt(expected * (1 - expected) / len(rows)))
    t_cov = sum(r["t_covered"] for r in rows) / len(rows)
    s_cov = sum(r["sigma2_covered"] for r in rows) / len(rows)
    mean, stderr = _mean_stderr([r["t_hat"] for r in rows])
    checks = {
        "t_coverage_in_band": abs(t_cov - expected) <= tol,
        "sigma2_coverage_in_band": abs(s_cov - expected) <= tol,
    }
    return MonteCarloSummary("coverage", rows, mean, stderr, t_true, min(t_cov, s_cov), checks)


def _summarize_monitor(config: ScenarioConfig, rows: list[dict]) -> MonteCarloSummary:
    k = config.scen.k
    mean, stderr = _mean_stderr([r["k_hat"] for r in rows])
    checks = {
        "mean_within_5_stderr": _within(mean, k, stderr),
        "corrected_upper_bounds_k": all(r["k_hat_corrected"] >= k for r in rows),
    }
    return MonteCarloSummary("monitor", rows, mean, stderr, k, None, checks)


def run_montecarlo(
    config: ScenarioConfig,
    out: Path | None = None,
    *,
    threads: int = 1,
) -> MonteCarloSummary:
    """Repeat one simulate-estimate pipeline over many seeds and check it against its analytic target."""
    spec = config.montecarlo
    if spec.scenario != "monitor" and not config.has_channel:
        raise ParameterError(f"montecarlo {spec.scenario} needs a channel: set t_trans or distance_km")
    seeds = trial_seeds(config.seeds, spec.trials)
    logger.info("montecarlo %s: %d trials of %d samples", spec.scenario, spec.trials, spec.count)

    if spec.scenario == "masking":
        rows = _numbered(_ordered_map(lambda s: _masking_trial(config, s), seeds, threads))
        summary = _summarize_masking(config, rows)
    elif spec.scenario == "coverage":
        sys, ch, scen = config.sys, config.channel, config.scen
        t_true = math.sqrt(sys.eta * ch.t_trans * scen.k)
        sigma2_true = sys.eta * ch.t_trans * ch.with_intercept_resend(scen.u).eps + 1 + sys.nu_el
        rows = _numbered(_ordered_map(lambda s: _coverage_trial(config, s, t_true, sigma2_true), seeds, threads))
        summary = _summarize_coverage(config, rows, t_true)
    else:
        rows = _numbered(_ordered_map(lambda s: _monitor_trial(config, s), seeds, threads))
        summary = _summarize_monitor(config, rows)

    failed = [name for name, ok in summary.checks.items() if not ok]
    if failed:
        logger.warning("montecarlo %s failed check(s): %s", spec.scenario, ", ".join(failed))
    if out is not None:
        write_montecarlo(out, summary)
    return summary


def with_montecarlo(config: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of config with montecarlo settings replaced."""
    return replace(config, montecarlo=replace(config.montecarlo, **changes))
