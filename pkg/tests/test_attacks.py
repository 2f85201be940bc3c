"""Tests for intercept-resend masking."""

import logging

import pytest

from voasim.attacks import analyze_masking, k_to_mask, masked_excess_noise, pir_excess_noise, stolen_information
from voasim.models import ChannelParams, FaultAttackScenario, ParameterError
from voasim.units import k_to_attenuation_db

# --- Noise accounting ---


def test_pir_excess_noise_adds_two_u():
    assert pir_excess_noise(0.1, 0.2) == pytest.approx(0.5)
    assert pir_excess_noise(0.1, 0.0) == 0.1


def test_full_intercept_resend():
    assert pir_excess_noise(0.0, 1.0) == 2.0


def test_masked_excess_noise_worked_example():
    """Five-fold fault exactly hides a 20% intercept-resend on top of 0.1 technical noise."""
    assert masked_excess_noise(0.1, 0.2, 5) == 0.1


def test_k_to_mask_worked_examples():
    assert k_to_mask(0.1, 1, 0.1) == 21.0
    assert k_to_mask(0.1, 0.2, 0.1) == 5.0


def test_masking_needs_about_thirteen_db_for_full_attack():
    assert k_to_attenuation_db(k_to_mask(0.1, 1, 0.1)) == pytest.approx(13.22, abs=0.01)


def test_k_to_mask_is_one_when_noise_already_under_alarm():
    assert k_to_mask(0.05, 0.0, 0.1) == 1.0
    assert k_to_mask(0.1, 0.0, 0.1) == 1.0
    assert masked_excess_noise(0.05, 0.0, k_to_mask(0.05, 0.0, 0.1)) <= 0.1


@pytest.mark.parametrize(
    ("eps_t", "u", "alarm"),
    [(0.05, 0.0, 0.1), (0.1, 0.2, 0.1), (0.02, 0.5, 0.03), (0.0, 1.0, 2.5)],
)
def test_k_to_mask_hides_exactly_at_the_alarm(eps_t, u, alarm):
    k = k_to_mask(eps_t, u, alarm)
    assert k >= 1.0
    assert masked_excess_noise(eps_t, u, k) <= alarm * (1 + 1e-12)
    if k > 1.0:
        assert masked_excess_noise(eps_t, u, k) == pytest.approx(alarm, rel=1e-12)


def test_no_fault_hides_nothing():
    assert masked_excess_noise(0.05, 0.1, 1) == pytest.approx(pir_excess_noise(0.05, 0.1))


@pytest.mark.parametrize(
    "call",
    [
        lambda: pir_excess_noise(-0.1, 0.2),
        lambda: pir_excess_noise(0.1, 1.2),
        lambda: masked_excess_noise(0.1, 0.2, 0.5),
        lambda: k_to_mask(0.1, 0.2, 0.0),
    ],
)
def test_rejects_out_of_domain(call):
    with pytest.raises(ParameterError):
        call()


# --- Masking analysis ---


def test_analyze_masking_hidden_at_required_k():
    analysis = analyze_masking(0.1, 0.2, 5, eps_alarm=0.1)
    assert analysis.eps_with_attack == pytest.approx(0.5)
    assert analysis.eps_observed == 0.1
    assert analysis.k_required_to_mask == 5.0
    assert analysis.attack_hidden


def test_analyze_masking_exposed_below_required_k():
    analysis = analyze_masking(0.1, 0.2, 4, eps_alarm=0.1)
    assert analysis.eps_observed == pytest.approx(0.125)
    assert not analysis.attack_hidden


def test_analyze_masking_logs_hidden_attack(caplog):
    with caplog.at_level(logging.WARNING, logger="voasim.attacks"):
        analyze_masking(0.1, 0.2, 10, eps_alarm=0.1)
    assert "hidden" in caplog.text


def test_analyze_masking_quiet_without_attack(caplog):
    with caplog.at_level(logging.WARNING, logger="voasim.attacks"):
        analyze_masking(0.1, 0.0, 10, eps_alarm=0.1)
    assert caplog.text == ""


# --- Information gain ---


def test_stolen_information_positive_under_fault(sys_default, channel_50km, fault_k5):
    assert stolen_information(channel_50km, fault_k5, sys_default) > 0


def test_stolen_information_zero_without_fault(sys_default, channel_50km):
    assert stolen_information(channel_50km, FaultAttackScenario(), sys_default) == 0.0


def test_stolen_information_never_negative(sys_default, fault_k5):
    for d_km in (40, 60, 80, 100, 140):
        ch = ChannelParams.from_distance(d_km, 0.05)
        assert stolen_information(ch, fault_k5, sys_default) >= 0


@pytest.mark.parametrize("finite_size", [True, False])
@pytest.mark.parametrize("k", [2.0, 5.0])
def test_stolen_information_shrinks_with_excess_noise(sys_default, k, finite_size):
    """Extra technical noise lowers both rates, and the gap between them with it."""
    scen = FaultAttackScenario(k=k)
    for d_km in (40, 60, 80):
        quiet = stolen_information(ChannelParams.from_distance(d_km, 0.01), scen, sys_default, finite_size=finite_size)
        noisy = stolen_information(ChannelParams.from_distance(d_km, 0.05), scen, sys_default, finite_size=finite_size)
        assert quiet >= noisy >= 0
        if d_km == 40:
            assert quiet > noisy


def test_stolen_information_shrinks_with_distance(sys_default, fault_k5):
    gains = [stolen_information(ChannelParams.from_distance(d, 0.01), fault_k5, sys_default) for d in (40, 60, 80)]
    assert gains == sorted(gains, reverse=True)
