"""Conversions between physical attenuator/fiber quantities and shot-noise units."""

import math

from voasim.models import ParameterError

DEFAULT_FIBER_LOSS_DB_PER_KM = 0.2


def attenuation_db_to_k(delta_db: float) -> float:
    """Output-intensity factor of an attenuator whose attenuation dropped by delta_db."""
    if not delta_db >= 0:
        raise ParameterError(f"attenuation reduction must be >= 0 dB, got {delta_db}")
    return 10 ** (delta_db / 10)


def k_to_attenuation_db(k: float) -> float:
    if not k >= 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return 10 * math.log10(k)


def mean_photon_to_variance(n_mean: float) -> float:
    if not n_mean >= 0:
        raise ParameterError(f"mean photon number must be >= 0, got {n_mean}")
    return 2 * n_mean


def distance_to_transmissivity(d_km: float, loss_db_per_km: float = DEFAULT_FIBER_LOSS_DB_PER_KM) -> float:
    if not d_km >= 0:
        raise ParameterError(f"fiber length must be >= 0 km, got {d_km}")
    if not loss_db_per_km > 0:
        raise ParameterError(f"fiber loss must be positive, got {loss_db_per_km}")
    return 10 ** (-loss_db_per_km * d_km / 10)


def apply_fault_to_state(v_a0: float, k: float) -> float:
    """Modulation variance actually leaving Alice when the attenuator passes k times the intended intensity."""
    if not k >= 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return k * v_a0
