import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from voasim.models import (
    ChannelParams,
    DetectorCalibration,
    FaultAttackScenario,
    ParameterError,
    SystemParams,
)
from voasim.presets import get_preset_calibration, get_preset_values
from voasim.units import DEFAULT_FIBER_LOSS_DB_PER_KM, distance_to_transmissivity

logger = logging.getLogger(__name__)

SYSTEM_KEYS = ("v_a0", "eta", "nu_el", "beta", "n_total", "m_est", "eps_pe", "eps_bar", "eps_pa", "n0")
SCENARIO_KEYS = ("k", "u")
EXTRA_KEYS = (
    "fiber_loss_db_per_km",
    "preset",
    "t_trans",
    "distance_km",
    "eps",
    "eps_list",
    "k_list",
    "sweep",
    "seeds",
    "output",
    "calibration",
    "montecarlo",
    "allow_small_m",
)
SWEEP_AXES = ("distance", "k", "eps")
MONTECARLO_SCENARIOS = ("masking", "coverage", "monitor")
_INT_KEYS = ("n_total", "m_est")
_CHANNEL_KEYS = ("t_trans", "distance_km")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if not self.values:
            raise ParameterError("sweep grid must not be empty")
        if list(self.values) != sorted(self.values):
            raise ParameterError(f"sweep grid must be sorted, got {self.values}")


@dataclass(frozen=True)
class MonteCarloSpec:
    scenario: str = "masking"
    trials: int = 30
    count: int = 2 * 10**6
    eps_alarm: float | None = None

    def __post_init__(self) -> None:
        if self.scenario not in MONTECARLO_SCENARIOS:
            raise ParameterError(f"montecarlo scenario must be one of {MONTECARLO_SCENARIOS}, got {self.scenario!r}")
        if self.trials < 1:
            raise ParameterError(f"montecarlo trials must be >= 1, got {self.trials}")
        if self.count < 4:
            raise ParameterError(f"montecarlo count must be >= 4, got {self.count}")


@dataclass(frozen=True)
class ScenarioConfig:
    sys: SystemParams = field(default_factory=SystemParams)
    scen: FaultAttackScenario = field(default_factory=FaultAttackScenario)
    eps: float = 0.01
    t_trans: float | None = None
    distance_km: float | None = None
    fiber_loss_db_per_km: float = DEFAULT_FIBER_LOSS_DB_PER_KM
    eps_list: tuple[float, ...] = (0.01, 0.03, 0.05)
    k_list: tuple[float, ...] = (1.0, 2.0, 5.0)
    sweep: SweepSpec | None = None
    seeds: tuple[int, ...] = (0,)
    output: Path | None = None
    calibration: DetectorCalibration = field(default_factory=DetectorCalibration)
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    allow_small_m: bool = False

    def __post_init__(self) -> None:
        if self.t_trans is not None and self.distance_km is not None:
            raise ParameterError("give either t_trans or distance_km, not both")
        if not self.seeds:
            raise ParameterError("at least one seed is required")

    @property
    def has_channel(self) -> bool:
        return self.t_trans is not None or self.distance_km is not None

    @property
    def channel(self) -> ChannelParams:
        """True channel of the scenario. Raises ParameterError when none was given."""
        if self.t_trans is not None:
            return ChannelParams(self.t_trans, self.eps)
        if self.distance_km is not None:
            return ChannelParams(distance_to_transmissivity(self.distance_km, self.fiber_loss_db_per_km), self.eps)
        raise ParameterError("no channel given: set t_trans or distance_km (--t-trans or --distance)")


def parse_grid(text: str) -> tuple[float, ...]:
    """Inclusive start:stop:step grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ParameterError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ParameterError(f"grid must be numeric start:stop:step, got {text!r}") from None
    if not step > 0 or stop < start:
        raise ParameterError(f"grid needs step > 0 and stop >= start, got {text!r}")
    count = int((stop - start) / step + 1e-9) + 1
    # Round to the step's precision so grids print cleanly.
    return tuple(round(start + i * step, 12) for i in range(count))


def _parse_sweep(raw) -> SweepSpec | None:
    if raw is None:
        return None
    if not isinstance(raw, dict) or "axis" not in raw:
        raise ParameterError(f"sweep must be a mapping with an 'axis', got {raw!r}")
    if "values" in raw:
        values = tuple(float(v) for v in raw["values"])
    else:
        values = parse_grid(f"{raw.get('start')}:{raw.get('stop')}:{raw.get('step')}")
    return SweepSpec(axis=str(raw["axis"]), values=values)


def _parse_calibration(raw) -> DetectorCalibration:
    if isinstance(raw, str):
        return get_preset_calibration(raw)
    if isinstance(raw, dict):
        try:
            return DetectorCalibration(**{k: float(v) for k, v in raw.items()})
        except TypeError as e:
            raise ParameterError(f"bad calibration mapping: {e}") from None
    raise ParameterError(f"calibration must be a preset name or mapping, got {raw!r}")


def _parse_montecarlo(raw: dict) -> MonteCarloSpec:
    try:
        return MonteCarloSpec(**raw)
    except TypeError as e:
        raise ParameterError(f"bad montecarlo mapping: {e}") from None


def build_config(values: dict, base_dir: Path | None = None) -> ScenarioConfig:
    """Layer user values over the chosen preset and validate them."""
    unknown = set(values) - set(SYSTEM_KEYS) - set(SCENARIO_KEYS) - set(EXTRA_KEYS)
    if unknown:
        raise ParameterError(f"unknown configuration keys: {', '.join(sorted(unknown))}")

    preset = values.get("preset", "default")
    merged = {**get_preset_values(preset), **values}

    sys_fields = {}
    for key in SYSTEM_KEYS:
        val = merged.get(key)
        if val is not None:
            sys_fields[key] = int(float(val)) if key in _INT_KEYS else float(val)
    sys = SystemParams(**sys_fields)
    scen = FaultAttackScenario(**{k: float(merged[k]) for k in SCENARIO_KEYS if merged.get(k) is not None})

    output = merged.get("output")
    if output is not None:
        output = Path(output)
        if base_dir is not None and not output.is_absolute():
            output = base_dir / output

    mc_raw = merged.get("montecarlo") or {}
    if not isinstance(mc_raw, dict):
        raise ParameterError(f"montecarlo must be a mapping, got {mc_raw!r}")

    cfg = ScenarioConfig(
        sys=sys,
        scen=scen,
        eps=float(merged.get("eps", 0.01)),
        t_trans=None if merged.get("t_trans") is None else float(merged["t_trans"]),
        distance_km=None if merged.get("distance_km") is None else float(merged["distance_km"]),
        fiber_loss_db_per_km=float(merged.get("fiber_loss_db_per_km", DEFAULT_FIBER_LOSS_DB_PER_KM)),
        eps_list=tuple(float(e) for e in merged.get("eps_list", (0.01, 0.03, 0.05))),
        k_list=tuple(float(k) for k in merged.get("k_list", (1.0, 2.0, 5.0))),
        sweep=_parse_sweep(merged.get("sweep")),
        seeds=tuple(int(s) for s in merged.get("seeds", (0,))),
        output=output,
        calibration=_parse_calibration(merged.get("calibration", preset)),
        montecarlo=_parse_montecarlo(mc_raw),
        allow_small_m=bool(merged.get("allow_small_m", False)),
    )
    # Validate a given channel eagerly.
    if cfg.has_channel:
        _ = cfg.channel
    return cfg


def load_config(path: Path | None = None, overrides: dict | None = None) -> ScenarioConfig:
    """Read a YAML scenario file, then apply command-line overrides whose value is not None."""
    values: dict = {}
    if path is not None:
        try:
            values = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as e:
            raise ParameterError(f"{path}: invalid YAML: {e}") from None
        if not isinstance(values, dict):
            raise ParameterError(f"{path}: configuration must be a mapping")
        logger.debug("loaded %d configuration keys from %s", len(values), path)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        # A channel given on the command line replaces the file's parameterization.
        if key in _CHANNEL_KEYS:
            for other in _CHANNEL_KEYS:
                values.pop(other, None)
        values[key] = value
    return build_config(values, base_dir=None if path is None else path.parent)
