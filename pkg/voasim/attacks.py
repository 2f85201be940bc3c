"""Intercept-resend noise accounting and how an attenuation fault hides it."""

import logging

from voasim.keyrate import evaluated_vs_practical
from voasim.models import ChannelParams, FaultAttackScenario, MaskingAnalysis, ParameterError, SystemParams

logger = logging.getLogger(__name__)


def pir_excess_noise(eps_t: float, u: float) -> float:
    """Excess noise estimated without fault while a fraction u of pulses is intercepted and resent."""
    if not eps_t >= 0:
        raise ParameterError(f"technical excess noise must be >= 0, got {eps_t}")
    return ChannelParams(1.0, eps_t).with_intercept_resend(u).eps


def masked_excess_noise(eps_t: float, u: float, k: float) -> float:
    if not k >= 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return pir_excess_noise(eps_t, u) / k


def k_to_mask(eps_t: float, u: float, eps_alarm: float) -> float:
    """Smallest attenuation factor k >= 1 that pulls the observed noise down to eps_alarm.

    Returns 1.0 when eps_t + 2u already sits at or under the alarm: no fault
    is needed to hide the attack.
    """
    if not eps_alarm > 0:
        raise ParameterError(f"alarm threshold must be positive, got {eps_alarm}")
    return max(1.0, pir_excess_noise(eps_t, u) / eps_alarm)


def analyze_masking(eps_t: float, u: float, k: float, eps_alarm: float) -> MaskingAnalysis:
    eps_with_attack = pir_excess_noise(eps_t, u)
    eps_observed = masked_excess_noise(eps_t, u, k)
    analysis = MaskingAnalysis(
        eps_technical=eps_t,
        u=u,
        k=k,
        eps_alarm=eps_alarm,
        eps_with_attack=eps_with_attack,
        eps_observed=eps_observed,
        k_required_to_mask=k_to_mask(eps_t, u, eps_alarm),
        attack_hidden=eps_observed <= eps_alarm,
    )
    if u > 0 and analysis.attack_hidden:
        logger.warning("intercept-resend with u=%s hidden at k=%s (observed eps %.6g)", u, k, eps_observed)
    return analysis


def stolen_information(
    true_ch: ChannelParams,
    scen: FaultAttackScenario,
    sys: SystemParams,
    *,
    finite_size: bool = True,
) -> float:
    """Key overestimate Eve can read without being noticed, bits per pulse.

    Each rate is clamped at zero first: a negative practical rate means the
    protocol should have aborted, so Eve gains the whole evaluated rate.
    """
    cmp = evaluated_vs_practical(true_ch, scen, sys, finite_size=finite_size)
    return max(cmp.k_e, 0.0) - max(cmp.k_p, 0.0)
