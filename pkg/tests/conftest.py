"""Shared test fixtures and helpers."""

from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from voasim.models import ChannelParams, FaultAttackScenario, SystemParams

def mk_config(tmp_path: Path, values: dict) -> Path:
    """Write a YAML scenario file and return its path."""
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(values))
    return path


def mk_system(**changes) -> SystemParams:
    """Default system parameters with selected fields replaced."""
    return SystemParams().with_values(**changes)


@pytest.fixture
def sys_default() -> SystemParams:
    return SystemParams()


@pytest.fixture
def perfect_sys() -> SystemParams:
    """Ideal detector: unit efficiency, no electronic noise."""
    return SystemParams(eta=1.0, nu_el=0.0)


@pytest.fixture
def channel_50km() -> ChannelParams:
    """50 km of 0.2 dB/km fiber, T = 0.1, eps = 0.01."""
    return ChannelParams.from_distance(50, 0.01)


@pytest.fixture
def fault_k5() -> FaultAttackScenario:
    return FaultAttackScenario(k=5.0)


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()
