"""Named parameter presets. Each preset is a sub-package with module-level constants."""

from importlib import import_module
from pathlib import Path

from voasim.models import DetectorCalibration

_PRESETS_DIR = Path(__file__).parent


def _load(preset_name: str):
    try:
        return import_module(f"voasim.presets.{preset_name}")
    except ModuleNotFoundError:
        raise FileNotFoundError(f"Preset '{preset_name}' not found") from None


def get_preset_values(preset_name: str = "default") -> dict:
    """Flat config values of a preset. Raises FileNotFoundError if missing."""
    mod = _load(preset_name)
    return {**getattr(mod, "SYSTEM", {}), **getattr(mod, "SCENARIO", {})}


def get_preset_calibration(preset_name: str = "default") -> DetectorCalibration:
    return DetectorCalibration(**getattr(_load(preset_name), "CALIBRATION", {}))


def list_presets() -> list[str]:
    return sorted(
        d.name
        for d in _PRESETS_DIR.iterdir()
        if d.is_dir() and not d.name.startswith("_") and (d / "__init__.py").exists()
    )


def get_preset_metadata(preset_name: str = "default") -> dict:
    try:
        mod = import_module(f"voasim.presets.{preset_name}")
        return {"name": getattr(mod, "NAME", preset_name), "description": getattr(mod, "DESCRIPTION", "")}
    except ModuleNotFoundError:
        return {"name": preset_name, "description": ""}
