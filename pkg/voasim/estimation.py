"""Maximum-likelihood channel estimation with finite-size confidence intervals."""

import logging
import math

import numpy as np
from scipy.special import erfcinv

from voasim.models import (
    ChannelEstimate,
    ChannelParams,
    MlEstimate,
    ParameterError,
    SampleSet,
    SystemParams,
    UnphysicalEstimateError,
)

logger = logging.getLogger(__name__)

# Below this the chi-squared law of the residual is not close enough to normal.
MIN_NORMAL_APPROX_M = 10**6


def inverse_tail_coefficient(eps_pe: float) -> float:
    """z with P(|Z| > z) = eps_pe for a standard normal Z."""
    if not 0 < eps_pe < 1:
        raise ParameterError(f"eps_pe must be in (0, 1), got {eps_pe}")
    return math.sqrt(2) * float(erfcinv(eps_pe))


def estimate_ml(
    est_set: SampleSet,
    eps_pe: float | None = None,
    *,
    allow_small_m: bool = False,
) -> MlEstimate:
    """Fit x_B = t·x_A + z. Half-widths are filled in only when eps_pe is given."""
    m = len(est_set)
    if m < 2:
        raise ParameterError(f"need at least 2 pairs, got {m}")
    x_a, x_b = est_set.x_alice, est_set.x_bob
    sum_x2 = float(np.dot(x_a, x_a))
    if sum_x2 == 0:
        raise ParameterError("Alice-side samples are all zero; the gain is undefined")

    t_hat = float(np.dot(x_a, x_b)) / sum_x2
    residual = x_b - t_hat * x_a
    sigma2_hat = float(np.dot(residual, residual)) / m
    ml = MlEstimate(t_hat=t_hat, sigma2_hat=sigma2_hat, m_used=m, sum_x2=sum_x2, n0=est_set.n0)
    if eps_pe is None:
        return ml

    delta_t, delta_sigma2 = confidence_intervals(ml, ml.v_x, eps_pe, allow_small_m=allow_small_m)
    return MlEstimate(
        t_hat=t_hat,
        sigma2_hat=sigma2_hat,
        m_used=m,
        sum_x2=sum_x2,
        delta_t=delta_t,
        delta_sigma2=delta_sigma2,
        n0=est_set.n0,
    )


def confidence_intervals(
    ml: MlEstimate,
    v_x: float,
    eps_pe: float,
    *,
    allow_small_m: bool = False,
) -> tuple[float, float]:
    m = ml.m_used
    if m < MIN_NORMAL_APPROX_M and not allow_small_m:
        raise ParameterError(
            f"m = {m} is below {MIN_NORMAL_APPROX_M}; the normal approximation needs allow_small_m=True"
        )
    if not v_x > 0:
        raise ParameterError(f"Alice-side variance must be positive, got {v_x}")
    z = inverse_tail_coefficient(eps_pe)
    delta_t = z * math.sqrt(ml.sigma2_hat / (m * v_x))
    delta_sigma2 = z * ml.sigma2_hat * math.sqrt(2) / math.sqrt(m)
    return delta_t, delta_sigma2


def channel_params_from_estimates(ml: MlEstimate, sys: SystemParams) -> ChannelEstimate:
    t_hat = ml.t_hat
    if not t_hat > 0:
        raise UnphysicalEstimateError(
            f"estimated gain t_hat = {t_hat:.6g} is not positive; Alice and Bob records are not positively correlated"
        )
    if ml.delta_t >= t_hat:
        raise UnphysicalEstimateError(f"confidence half-width {ml.delta_t:.6g} swallows the gain {t_hat:.6g}")

    n0 = ml.n0
    floor = n0 + sys.nu_el * n0
    return ChannelEstimate(
        t_est=t_hat**2 / sys.eta,
        eps_est=(ml.sigma2_hat - floor) / (n0 * t_hat**2),
        t_min=(t_hat - ml.delta_t) ** 2 / sys.eta,
        # Worst-case noise keeps the point gain in the denominator.
        eps_max=(ml.sigma2_hat + ml.delta_sigma2 - floor) / (t_hat**2 * n0),
        m_used=ml.m_used,
    )


def biased_channel_params(true_ch: ChannelParams, k: float) -> ChannelEstimate:
    """Noise-free estimate Alice and Bob converge to when the attenuator passes k times the intended intensity."""
    if not k >= 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return ChannelEstimate.exact(k * true_ch.t_trans, true_ch.eps / k)


def expected_channel_estimate(
    v_a0: float,
    t_trans: float,
    eps: float,
    sys: SystemParams,
    *,
    allow_small_m: bool = False,
) -> ChannelEstimate:
    """Finite-size estimate whose statistics equal their expectations.

    v_a0 is the variance of Alice's records, (t_trans, eps) the channel the
    estimator converges to. Passing (V_A0, k·T, eps/k) reproduces the biased
    estimate with the spread Alice and Bob would actually see.
    """
    if not t_trans > 0:
        raise ParameterError(f"t_trans must be positive, got {t_trans}")
    gain2 = sys.eta * t_trans
    t_hat = math.sqrt(gain2)
    sigma2 = gain2 * eps + 1 + sys.nu_el
    m = sys.m_est
    ml = MlEstimate(t_hat=t_hat, sigma2_hat=sigma2, m_used=m, sum_x2=m * v_a0)
    delta_t, delta_sigma2 = confidence_intervals(ml, v_a0, sys.eps_pe, allow_small_m=allow_small_m)
    if delta_t >= t_hat:
        raise UnphysicalEstimateError(f"confidence half-width {delta_t:.6g} swallows the gain {t_hat:.6g}")
    # Closed form of the sampled formulas; avoids subtracting the shot-noise floor from sigma2.
    return ChannelEstimate(
        t_est=t_trans,
        eps_est=eps,
        t_min=(t_hat - delta_t) ** 2 / sys.eta,
        eps_max=eps + delta_sigma2 / gain2,
        m_used=m,
    )
