"""voasim CLI - attenuation-fault and intercept-resend simulator for Gaussian-modulated CV-QKD."""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from functools import wraps
from pathlib import Path

import click
import yaml

from voasim import export
from voasim.attacks import analyze_masking
from voasim.channel import RESEND_MODELS, simulate_batches, split_estimation_key
from voasim.config import MONTECARLO_SCENARIOS, ScenarioConfig, load_config, parse_grid
from voasim.estimation import channel_params_from_estimates, estimate_ml
from voasim.keyrate import evaluated_vs_practical
from voasim.models import NumericalDegeneracyError, ParameterError, UnphysicalEstimateError
from voasim.monitor import read_monitor, simulate_monitor_voltages
from voasim.presets import get_preset_metadata, list_presets
from voasim.sweeps import UNPHYSICAL_NOTE, run_fig6, run_fig7, run_montecarlo, with_montecarlo

logger = logging.getLogger(__name__)

# --- Error mapping ---


class InvariantViolation(click.ClickException):
    exit_code = 1


@contextmanager
def _errors() -> Iterator[None]:
    """Bad input exits 2, an invariant violation exits 1, I/O errors name the path."""
    try:
        yield
    except (UnphysicalEstimateError, NumericalDegeneracyError) as e:
        raise InvariantViolation(str(e)) from None
    except ParameterError as e:
        raise click.UsageError(str(e)) from None
    except FileNotFoundError as e:
        raise click.UsageError(str(e)) from None
    except OSError as e:
        raise click.ClickException(f"{e.filename}: {e.strerror}") from None


def _emit(text: str, out: Path | None, label: str) -> None:
    if out is None:
        click.echo(text, nl=False)
        return
    export.write_text(out, text)
    click.echo(f"Wrote {label} to {out}", err=True)


# --- Shared options ---


def scenario_options(fn):
    """Options every subcommand that builds a ScenarioConfig accepts."""

    @click.option(
        "--config", "-c", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None
    )
    @click.option("--preset", default=None, help="Base parameter preset (default: 'default').")
    @click.option("--seed", type=click.IntRange(min=0), default=None, help="RNG seed (u64).")
    @click.option("--allow-small-m", is_flag=True, help="Permit m < 10^6 for confidence intervals.")
    @wraps(fn)
    def wrapper(*args, config_path, preset, seed, allow_small_m, **kwargs):
        overrides = {
            "preset": preset,
            "seeds": None if seed is None else [seed],
            "allow_small_m": allow_small_m or None,
        }
        return fn(*args, config_path=config_path, overrides=overrides, **kwargs)

    return wrapper


def channel_options(fn):
    @click.option("--distance", "distance_km", type=float, default=None, help="Fiber length in km.")
    @click.option("--t-trans", type=float, default=None, help="Channel transmittance T (instead of --distance).")
    @click.option("--eps", type=float, default=None, help="Excess noise in shot-noise units.")
    @click.option("--k", type=float, default=None, help="Attenuation factor left by the fault.")
    @click.option("--u", type=float, default=None, help="Intercept-resend fraction.")
    @wraps(fn)
    def wrapper(*args, overrides, distance_km, t_trans, eps, k, u, **kwargs):
        if distance_km is not None and t_trans is not None:
            raise click.UsageError("give either --distance or --t-trans, not both")
        channel = {"distance_km": distance_km, "t_trans": t_trans, "eps": eps, "k": k, "u": u}
        return fn(*args, overrides={**overrides, **channel}, **kwargs)

    return wrapper


def _config(config_path: Path | None, overrides: dict) -> ScenarioConfig:
    with _errors():
        return load_config(config_path, overrides)


# --- CLI commands ---


@click.group()
@click.version_option(package_name="voasim")
@click.option("--verbose", "-v", count=True, help="-v for progress, -vv for debug output.")
def cli(verbose: int):
    """voasim - simulate attenuation faults and hidden intercept-resend attacks on CV-QKD."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


@cli.command()
@scenario_options
@click.option("--eps", "eps_values", type=float, multiple=True, help="True excess noise (repeatable).")
@click.option("--grid", default="1:25:1", show_default=True, help="k grid start:stop:step.")
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None)
def fig6(config_path: Path | None, overrides: dict, eps_values: tuple[float, ...], grid: str, out: Path | None):
    """Observed excess noise against the attenuation factor k."""
    config = _config(config_path, overrides)
    with _errors():
        rows = run_fig6(eps_values or config.eps_list, parse_grid(grid))
        _emit(export.format_rows(export.FIG6_COLUMNS, rows), out or config.output, "fig6 rows")


@cli.command()
@scenario_options
@click.option("--grid", default=None, help="Distance grid start:stop:step in km (default 40:160:2).")
@click.option("--k", "k_values", type=float, multiple=True, help="Attenuation factor (repeatable).")
@click.option("--eps", "eps_values", type=float, multiple=True, help="True excess noise (repeatable).")
@click.option("--u", type=float, default=None, help="Intercept-resend fraction.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None)
def fig7(
    config_path: Path | None,
    overrides: dict,
    grid: str | None,
    k_values: tuple[float, ...],
    eps_values: tuple[float, ...],
    u: float | None,
    threads: int,
    out: Path | None,
):
    """Evaluated, practical and monitor-corrected key rate against distance."""
    overrides = {
        **overrides,
        "k_list": list(k_values) or None,
        "eps_list": list(eps_values) or None,
        "u": u,
    }
    config = _config(config_path, overrides)
    with _errors():
        rows = run_fig7(config, threads=threads, grid=grid)
        _emit(export.format_rows(export.SWEEP_ALL_COLUMNS, rows), out or config.output, "fig7 rows")
    skipped = sum(r["note"] == UNPHYSICAL_NOTE for r in rows)
    if skipped:
        click.echo(f"{skipped} point(s) with k·T > 1 marked {UNPHYSICAL_NOTE}", err=True)


@cli.command()
@scenario_options
@channel_options
@click.option("--count", "-n", type=click.IntRange(min=2), default=10**6, show_default=True)
@click.option("--units", type=click.Choice(["snu", "voltage"]), default="snu", show_default=True)
@click.option("--resend-model", type=click.Choice(RESEND_MODELS), default="gaussian", show_default=True)
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), required=True)
def simulate(config_path: Path | None, overrides: dict, count: int, units: str, resend_model: str, out: Path):
    """Generate paired Alice/Bob quadrature records, one batch per configured seed."""
    config = _config(config_path, overrides)
    with _errors():
        samples = simulate_batches(
            config.sys, config.channel, config.scen, count, config.seeds, units=units, resend_model=resend_model
        )
        export.write_samples(samples, out)
    click.echo(f"Wrote {count} pairs to {out}")
    click.echo(f"  Metadata: {export.meta_path(out)}")


@cli.command()
@click.argument("samples", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@scenario_options
@click.option("--m", "m_est", type=click.IntRange(min=2), default=None, help="Use a random m-pair estimation subset.")
@click.option("--units", type=click.Choice(["snu", "voltage"]), default=None, help="Override the sidecar units.")
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None)
def estimate(
    samples: Path, config_path: Path | None, overrides: dict, m_est: int | None, units: str | None, out: Path | None
):
    """Maximum-likelihood channel estimate with worst-case bounds from SAMPLES."""
    config = _config(config_path, overrides)
    with _errors():
        records = export.read_samples(samples, units=units, n0=config.sys.n0 if units == "voltage" else None)
        if m_est is not None:
            records, _ = split_estimation_key(records, m_est, config.seeds[0])
        ml = estimate_ml(records, config.sys.eps_pe, allow_small_m=config.allow_small_m)
        est = channel_params_from_estimates(ml, config.sys)
        if out is None:
            click.echo(export.format_rows(export.ESTIMATE_COLUMNS, [export.estimate_row(est)]), nl=False)
        else:
            export.write_estimates(out, [est])
            click.echo(f"Wrote estimate to {out}", err=True)
    if not est.is_physical:
        logger.warning("estimated T_min = %.6g lies outside (0, 1]", est.t_min)


@cli.command()
@scenario_options
@channel_options
@click.option("--asymptotic", is_flag=True, help="Skip the finite-size estimation penalty.")
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None, help="YAML report output.")
def keyrate(config_path: Path | None, overrides: dict, asymptotic: bool, out: Path | None):
    """Key rate computed from the biased estimate against the rate actually available."""
    config = _config(config_path, overrides)

    def report(r):
        return {"key_rate": r.key_rate, "i_ab": r.i_ab, "s_be": r.s_be, "delta_n": r.delta_n, "t_min": r.t_min}

    with _errors():
        cmp = evaluated_vs_practical(
            config.channel, config.scen, config.sys, finite_size=not asymptotic, allow_small_m=config.allow_small_m
        )
        doc = {
            "evaluated": report(cmp.evaluated),
            "practical": report(cmp.practical),
            "overestimated": cmp.overestimated,
        }
        _emit(yaml.safe_dump(doc, sort_keys=False), out, "key rates")


@cli.command()
@click.option("--eps-t", type=float, required=True, help="Technical excess noise.")
@click.option("--u", type=float, required=True, help="Intercept-resend fraction.")
@click.option("--k", type=float, required=True, help="Attenuation factor.")
@click.option("--alarm", type=float, required=True, help="Excess-noise alarm threshold.")
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CSV row output.")
def mask(eps_t: float, u: float, k: float, alarm: float, out: Path | None):
    """How far a k-fold attenuation fault hides intercept-resend noise."""
    with _errors():
        analysis = analyze_masking(eps_t, u, k, alarm)
        if out is not None:
            export.write_rows(out, export.MASKING_COLUMNS, [export.masking_row(analysis)])
    click.echo(export.masking_report(analysis), nl=False)


@cli.command()
@click.argument("voltages", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=False)
@scenario_options
@click.option("--k", type=float, default=None, help="Attenuation factor for simulated voltages.")
@click.option("--count", "-n", type=click.IntRange(min=2), default=10**6, show_default=True)
@click.option("--calibration", default=None, help="Calibration preset for the tap detector.")
@click.option("--no-correction", is_flag=True, help="Report the point reading without the finite-size correction.")
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None, help="YAML report output.")
@click.option(
    "--save-voltages",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Also write the voltages the reading was taken from (u_volts CSV).",
)
def monitor(
    voltages: Path | None,
    config_path: Path | None,
    overrides: dict,
    k: float | None,
    count: int,
    calibration: str | None,
    no_correction: bool,
    out: Path | None,
    save_voltages: Path | None,
):
    """Recover the attenuation factor from tap VOLTAGES (simulated when omitted)."""
    config = _config(config_path, {**overrides, "k": k, "calibration": calibration})
    with _errors():
        if voltages is None:
            u = simulate_monitor_voltages(config.sys, config.scen, config.calibration, count, config.seeds[0])
        else:
            u = export.read_voltages(voltages)
        eps_pe = None if no_correction else config.sys.eps_pe
        reading = read_monitor(u, config.sys, config.calibration, eps_pe=eps_pe)
        if save_voltages is not None:
            export.write_voltages(save_voltages, u)
        _emit(export.monitor_record(reading), out, "monitor reading")


@cli.command()
@scenario_options
@channel_options
@click.option("--scenario", type=click.Choice(MONTECARLO_SCENARIOS), default=None)
@click.option("--trials", type=click.IntRange(min=1), default=None)
@click.option("--count", "-n", type=click.IntRange(min=4), default=None, help="Pulses per trial.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out", "-o", type=click.Path(dir_okay=False, path_type=Path), default=None)
def montecarlo(
    config_path: Path | None,
    overrides: dict,
    scenario: str | None,
    trials: int | None,
    count: int | None,
    threads: int,
    out: Path | None,
):
    """Repeat simulate → estimate over seeds; exit 1 if any check fails."""
    config = _config(config_path, overrides)
    changes = {"scenario": scenario, "trials": trials, "count": count}
    with _errors():
        config = with_montecarlo(config, **{key: v for key, v in changes.items() if v is not None})
        summary = run_montecarlo(config, out or config.output, threads=threads)
    click.echo(export.montecarlo_report(summary), nl=False)
    if not summary.passed:
        failed = ", ".join(name for name, ok in summary.checks.items() if not ok)
        raise InvariantViolation(f"failed check(s): {failed}")


@cli.command()
def presets():
    """List bundled parameter presets."""
    for name in list_presets():
        meta = get_preset_metadata(name)
        click.echo(f"  {name:10s} {meta['description']}")


if __name__ == "__main__":
    cli()
