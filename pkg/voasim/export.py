"""CSV and YAML emission. Every writer prints a header row and full-precision floats."""

import csv
import io
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from voasim.models import (
    ChannelEstimate,
    MaskingAnalysis,
    MonitorReading,
    MonteCarloSummary,
    ParameterError,
    SampleMeta,
    SampleSet,
    Units,
)

SAMPLE_COLUMNS = ("x_alice", "x_bob")
ESTIMATE_COLUMNS = ("t_est", "eps_est", "t_min", "eps_max", "m_used")
FIG6_COLUMNS = ("k", "eps_true", "eps_observed")
SWEEP_COLUMNS = ("distance_km", "k", "u", "eps_true", "K_e", "K_p", "K_m", "i_ab", "s_be", "delta_n")
# Negative rates shown as 0 only in these.
CLAMPED_COLUMNS = ("K_e_clamped", "K_p_clamped", "K_m_clamped")
SWEEP_ALL_COLUMNS = SWEEP_COLUMNS + CLAMPED_COLUMNS + ("note",)
MASKING_COLUMNS = (
    "eps_technical",
    "u",
    "k",
    "eps_alarm",
    "eps_with_attack",
    "eps_observed",
    "k_required_to_mask",
    "attack_hidden",
)
MONITOR_FIELDS = ("var_raw", "var_corrected", "v_m", "v_p", "k_hat", "n_u")
VOLTAGE_COLUMN = "u_volts"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def format_rows(columns: tuple[str, ...], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_rows(path: Path, columns: tuple[str, ...], rows: list[dict]) -> Path:
    return write_text(path, format_rows(columns, rows))


def read_rows(path: Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise ParameterError(f"{path}: missing column(s) {', '.join(missing)}")
        return list(reader)


# --- Samples ---


def meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.yaml")


def _meta_dict(meta: SampleMeta) -> dict:
    data = {
        "seed": meta.seed,
        "rng": meta.rng,
        "resend_model": meta.resend_model,
        "system": asdict(meta.sys),
        "channel": asdict(meta.channel),
        "scenario": asdict(meta.scenario),
    }
    if meta.batch_seeds:
        data["batch_seeds"] = list(meta.batch_seeds)
    return data


def write_samples(sample_set: SampleSet, path: Path) -> Path:
    rows = ({"x_alice": a, "x_bob": b} for a, b in sample_set)
    write_rows(path, SAMPLE_COLUMNS, list(rows))
    sidecar = {"units": sample_set.units, "n0": sample_set.n0, "count": len(sample_set)}
    if sample_set.meta is not None:
        sidecar.update(_meta_dict(sample_set.meta))
    write_text(meta_path(path), yaml.safe_dump(sidecar, sort_keys=True))
    return path


def read_samples(path: Path, units: Units | None = None, n0: float | None = None) -> SampleSet:
    """Ingest external records. Units and n0 come from the sidecar unless given."""
    sidecar = {}
    if meta_path(path).exists():
        sidecar = yaml.safe_load(meta_path(path).read_text()) or {}
    units = units or sidecar.get("units", "snu")
    if n0 is None:
        n0 = float(sidecar.get("n0", 1.0)) if units == "voltage" else 1.0
    rows = read_rows(path, SAMPLE_COLUMNS)
    if not rows:
        raise ParameterError(f"{path}: no sample rows")
    try:
        pairs = [(float(r["x_alice"]), float(r["x_bob"])) for r in rows]
    except ValueError as e:
        raise ParameterError(f"{path}: {e}") from None
    return SampleSet.from_pairs(pairs, units=units, n0=n0)


# --- Estimates and analyses ---


def estimate_row(est: ChannelEstimate) -> dict:
    return {c: getattr(est, c) for c in ESTIMATE_COLUMNS}


def write_estimates(path: Path, estimates: list[ChannelEstimate]) -> Path:
    return write_rows(path, ESTIMATE_COLUMNS, [estimate_row(e) for e in estimates])


def masking_row(analysis: MaskingAnalysis) -> dict:
    return asdict(analysis)


def masking_report(analysis: MaskingAnalysis) -> str:
    return yaml.safe_dump({"masking": masking_row(analysis)}, sort_keys=False)


def monitor_record(reading: MonitorReading) -> str:
    record = {f: getattr(reading, f) for f in MONITOR_FIELDS}
    record["below_nominal"] = reading.below_nominal
    record["below_shot_noise"] = reading.below_shot_noise
    return yaml.safe_dump({"monitor": record}, sort_keys=False)


def read_voltages(path: Path) -> np.ndarray:
    rows = read_rows(path, (VOLTAGE_COLUMN,))
    try:
        return np.array([float(r[VOLTAGE_COLUMN]) for r in rows], dtype=np.float64)
    except ValueError as e:
        raise ParameterError(f"{path}: {e}") from None


def write_voltages(path: Path, voltages: np.ndarray) -> Path:
    return write_rows(path, (VOLTAGE_COLUMN,), [{VOLTAGE_COLUMN: float(u)} for u in voltages])


def montecarlo_report(summary: MonteCarloSummary) -> str:
    aggregate = {
        "scenario": summary.scenario,
        "trials": len(summary.rows),
        "mean": summary.mean,
        "stderr": summary.stderr,
        "target": summary.target,
        "coverage": summary.coverage,
        "checks": dict(summary.checks),
        "passed": summary.passed,
    }
    return yaml.safe_dump({"montecarlo": aggregate}, sort_keys=False)


def write_montecarlo(path: Path, summary: MonteCarloSummary) -> Path:
    """Per-trial CSV plus a YAML aggregate next to it."""
    columns = tuple(summary.rows[0].keys()) if summary.rows else ("trial",)
    write_rows(path, columns, summary.rows)
    write_text(path.with_suffix(".summary.yaml"), montecarlo_report(summary))
    return path
