"""Tests for the modulation-variance monitor."""

import logging
import math
import threading

import numpy as np
import pytest

from voasim.channel import simulate_channel
from voasim.config import build_config
from voasim.estimation import (
    channel_params_from_estimates,
    estimate_ml,
    expected_channel_estimate,
    inverse_tail_coefficient,
)
from voasim.keyrate import key_rate, secret_key_rate
from voasim.models import ChannelParams, DetectorCalibration, FaultAttackScenario, ParameterError
from voasim.monitor import (
    VoltageMonitor,
    corrected_key_rate,
    finite_size_correction,
    practical_modulation_variance,
    read_monitor,
    recover_k,
    sample_variance,
    simulate_monitor_voltages,
    voltage_to_quadrature_variance,
)
from voasim.presets import get_preset_calibration

N_U = 10**6


def _k_stderr(k: float, v_a0: float = 4.0, nu_el: float = 0.01, n: int = N_U) -> float:
    """Standard error of the point reading of k from n samples."""
    return (k * v_a0 + 1 + nu_el) * math.sqrt(2 / n) / v_a0


# --- Pipeline stages ---


def test_sample_variance_is_population_form():
    assert sample_variance([1.0, 3.0]) == 1.0
    assert sample_variance([2.0, 2.0, 2.0]) == 0.0


def test_sample_variance_rejects_single_sample():
    with pytest.raises(ParameterError):
        sample_variance([1.0])


def test_sample_variance_survives_large_offset(sys_default):
    """A 1e9 V pedestal must not swamp a 1e-6 V² spread."""
    u = 1e9 + np.random.Generator(np.random.PCG64(8)).normal(0.0, 1e-3, 10_000)
    batch = sample_variance(u)
    assert batch == pytest.approx(1e-6, rel=0.08)

    mon = VoltageMonitor(sys_default)
    for chunk in np.array_split(u, 5):
        mon.append(chunk)
    assert mon.snapshot().var_raw == pytest.approx(batch, rel=1e-6)


def test_finite_size_correction_raises_variance():
    z = inverse_tail_coefficient(1e-10)
    corrected = finite_size_correction(2.0, N_U, 1e-10)
    assert corrected == pytest.approx(2.0 * (1 + z * math.sqrt(2) / 1000))
    assert corrected > 2.0


def test_voltage_to_quadrature_divides_by_gain():
    cal = DetectorCalibration(p_lo=2.0, g=3.0)
    assert voltage_to_quadrature_variance(18.0, cal) == pytest.approx(1.0)


def test_practical_modulation_variance(sys_default):
    assert practical_modulation_variance(21.01, sys_default) == pytest.approx(20.0)


def test_practical_modulation_variance_in_absolute_units(sys_default):
    sys = sys_default.with_values(n0=0.5)
    assert practical_modulation_variance(0.5 * 21.01, sys) == pytest.approx(20.0)


def test_below_shot_noise_warns(sys_default, caplog):
    with caplog.at_level(logging.WARNING, logger="voasim.monitor"):
        assert practical_modulation_variance(0.9, sys_default) < 0
    assert "shot-noise" in caplog.text


def test_recover_k():
    assert recover_k(20.0, 4.0) == 5.0


def test_recover_k_below_nominal_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="voasim.monitor"):
        assert recover_k(3.0, 4.0) == 0.75
    assert "below nominal" in caplog.text


def test_recover_k_rejects_nonpositive_preset():
    with pytest.raises(ParameterError):
        recover_k(20.0, 0.0)


# --- Readings ---


def test_simulated_voltages_recover_k(sys_default):
    """Point reading of a five-fold fault sits within 5 standard errors of 5."""
    cal = DetectorCalibration()
    u = simulate_monitor_voltages(sys_default, FaultAttackScenario(k=5), cal, N_U, seed=17)
    reading = read_monitor(u, sys_default, cal)
    assert abs(reading.k_hat - 5.0) <= 5 * _k_stderr(5.0)
    assert reading.var_corrected == reading.var_raw
    assert not reading.below_nominal


def test_corrected_reading_upper_bounds_k(sys_default):
    cal = DetectorCalibration()
    u = simulate_monitor_voltages(sys_default, FaultAttackScenario(k=5), cal, N_U, seed=18)
    reading = read_monitor(u, sys_default, cal, eps_pe=1e-10)
    assert reading.k_hat > 5.0
    assert reading.var_corrected > reading.var_raw


def test_unfaulted_reading_near_one(sys_default):
    cal = DetectorCalibration()
    u = simulate_monitor_voltages(sys_default, FaultAttackScenario(), cal, N_U, seed=19)
    assert read_monitor(u, sys_default, cal).k_hat == pytest.approx(1.0, abs=5 * _k_stderr(1.0))


def test_telecom_calibration_round_trip():
    """Voltages through a physical detector chain map back to shot-noise units."""
    sys = build_config({"preset": "telecom"}).sys
    cal = get_preset_calibration("telecom")
    u = simulate_monitor_voltages(sys, FaultAttackScenario(k=3), cal, N_U, seed=23)
    reading = read_monitor(u, sys, cal)
    assert reading.v_p == pytest.approx(12.0, abs=5 * 4.0 * _k_stderr(3.0))
    assert reading.v_m == pytest.approx(13.01 * sys.n0, rel=0.01)


def test_simulate_monitor_rejects_tiny_count(sys_default):
    with pytest.raises(ParameterError):
        simulate_monitor_voltages(sys_default, FaultAttackScenario(), DetectorCalibration(), 1, seed=0)


# --- Countermeasure ---


def test_corrected_key_rate_matches_practical(sys_default):
    biased = expected_channel_estimate(4.0, 5 * 0.1, 0.01 / 5, sys_default)
    corrected = corrected_key_rate(biased, 5.0, 20.0, sys_default)
    practical = key_rate(20.0, 0.1, 0.01, sys_default)
    assert corrected.key_rate == pytest.approx(practical.key_rate, rel=1e-12, abs=1e-12)


def _sampled_estimate(sys, v_a0: float, k: float, seed: int):
    """Channel estimate with confidence bounds from 10^6 simulated pairs at T = 0.2, eps = 0.01."""
    ch = ChannelParams(0.2, 0.01)
    records = simulate_channel(sys.with_values(v_a0=v_a0), ch, FaultAttackScenario(k=k), N_U, seed)
    return channel_params_from_estimates(estimate_ml(records, sys.eps_pe), sys)


def test_sampled_corrected_key_rate_matches_practical(sys_default):
    """A faulted record de-biased with the true k gives the rate of the equivalent unfaulted record."""
    faulted = _sampled_estimate(sys_default, 4.0, 5.0, seed=31)
    practical = _sampled_estimate(sys_default, 20.0, 1.0, seed=31)
    corrected = corrected_key_rate(faulted, 5.0, 20.0, sys_default)
    expected = secret_key_rate(20.0, practical, sys_default)
    assert corrected.t_min == pytest.approx(expected.t_min, rel=1e-9)
    assert corrected.eps_max == pytest.approx(expected.eps_max, rel=1e-9)
    assert corrected.key_rate == pytest.approx(expected.key_rate, rel=1e-9, abs=1e-12)


def test_sampled_corrected_key_rate_with_monitor_reading(sys_default):
    """Simulate, estimate, read the tap monitor, correct: K_m lands in the band k_hat can reach."""
    faulted = _sampled_estimate(sys_default, 4.0, 5.0, seed=32)
    cal = DetectorCalibration()
    u = simulate_monitor_voltages(sys_default, FaultAttackScenario(k=5), cal, N_U, seed=33)
    reading = read_monitor(u, sys_default, cal)
    assert reading.k_hat == pytest.approx(5.0, abs=5 * _k_stderr(5.0))

    def rate(k):
        return corrected_key_rate(faulted, k, k * 4.0, sys_default).key_rate

    k_p = rate(5.0)
    edges = (rate(5.0 - 5 * _k_stderr(5.0)), rate(5.0 + 5 * _k_stderr(5.0)))
    low, high = min(edges), max(edges)
    k_m = corrected_key_rate(faulted, reading.k_hat, reading.v_p, sys_default).key_rate
    assert low <= k_p <= high
    assert low - 1e-12 <= k_m <= high + 1e-12


def test_corrected_key_rate_rejects_k_below_one(sys_default):
    biased = expected_channel_estimate(4.0, 0.1, 0.01, sys_default)
    with pytest.raises(ParameterError):
        corrected_key_rate(biased, 0.9, 3.6, sys_default)


# --- Streaming monitor ---


def test_streaming_matches_batch(sys_default):
    u = np.random.Generator(np.random.PCG64(5)).normal(1.0, 3.0, 10_000)
    mon = VoltageMonitor(sys_default)
    for chunk in np.array_split(u, 7):
        mon.append(chunk)
    snap = mon.snapshot()
    batch = read_monitor(u, sys_default)
    assert mon.count == 10_000
    assert snap.var_raw == pytest.approx(batch.var_raw, rel=1e-12)
    assert snap.k_hat == pytest.approx(batch.k_hat, rel=1e-12)


def test_streaming_ignores_empty_batches(sys_default):
    mon = VoltageMonitor(sys_default)
    mon.append([])
    assert mon.count == 0


def test_snapshot_needs_two_samples(sys_default):
    mon = VoltageMonitor(sys_default)
    mon.append([1.0])
    with pytest.raises(ParameterError):
        mon.snapshot()


def test_streaming_applies_correction(sys_default):
    u = np.random.Generator(np.random.PCG64(6)).normal(0.0, 4.0, 1000)
    mon = VoltageMonitor(sys_default, eps_pe=1e-3)
    mon.append(u)
    assert mon.snapshot().var_corrected > mon.snapshot().var_raw


def test_concurrent_writers_lose_nothing(sys_default):
    mon = VoltageMonitor(sys_default)
    batches = [np.full(100, float(i)) for i in range(40)]

    def writer(chunk):
        for b in chunk:
            mon.append(b)

    threads = [threading.Thread(target=writer, args=(batches[i::4],)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert mon.count == 4000
    assert mon.snapshot().var_raw == pytest.approx(sample_variance(np.concatenate(batches)), rel=1e-9)
