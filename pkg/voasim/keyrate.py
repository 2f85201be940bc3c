"""Finite-size secret key rate against collective attacks, reverse reconciliation.

K = (n/N)·(beta·I_AB − S_BE − Delta(n)). I_AB uses the point estimate of the
channel; S_BE uses the worst-case bounds (T_min, eps_max). All quantities are
in shot-noise units and bits per pulse.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from voasim.estimation import expected_channel_estimate
from voasim.models import (
    ChannelEstimate,
    ChannelParams,
    FaultAttackScenario,
    KeyRateReport,
    NoiseBudget,
    NumericalDegeneracyError,
    ParameterError,
    SymplecticSpectrum,
    SystemParams,
    UnphysicalEstimateError,
)
from voasim.units import apply_fault_to_state

logger = logging.getLogger(__name__)

# Relative to A² or C².
DISCRIMINANT_TOLERANCE = 1e-9

_OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def mutual_information(v_a0: float, noise: NoiseBudget) -> float:
    if not v_a0 > 0:
        raise ParameterError(f"v_a0 must be positive, got {v_a0}")
    if not noise.chi_tot > -1:
        raise ParameterError(f"total noise chi_tot = {noise.chi_tot} is unphysical (must exceed -1)")
    return 0.5 * math.log2((v_a0 + 1 + noise.chi_tot) / (1 + noise.chi_tot))


def g_function(x: float) -> float:
    if not x >= 0:
        raise ParameterError(f"G is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    return (x + 1) * math.log2(x + 1) - x * math.log2(x)


def _root_pair(s: float, p: float, label: str) -> tuple[float, float]:
    """Square roots of the two roots of y² − s·y + p = 0."""
    disc = s * s - 4 * p
    if disc < 0:
        if disc < -DISCRIMINANT_TOLERANCE * s * s:
            raise NumericalDegeneracyError(f"{label} discriminant {disc:.3e} is negative beyond tolerance")
        disc = 0.0
    root = math.sqrt(disc)
    hi, lo = 0.5 * (s + root), 0.5 * (s - root)
    return math.sqrt(hi), math.sqrt(max(lo, 0.0))


def symplectic_spectrum(v_a0: float, t_min: float, eps_max: float, sys: SystemParams) -> SymplecticSpectrum:
    if not t_min > 0:
        raise ParameterError(f"t_min must be positive, got {t_min}")
    if not v_a0 > 0:
        raise ParameterError(f"v_a0 must be positive, got {v_a0}")

    v = v_a0 + 1
    chi_hom = (1 - sys.eta + sys.nu_el) / sys.eta
    bob = t_min * (v_a0 + eps_max) + 1

    a = v**2 - 2 * t_min * (v_a0**2 + 2 * v_a0) + bob**2
    b = ((t_min * eps_max + 1) * v - t_min * v_a0) ** 2
    sqrt_b = math.sqrt(b)
    # T_min·(V + chi_tot) at the worst-case channel.
    denom = t_min * (v_a0 + eps_max) + (1 + sys.nu_el) / sys.eta
    c = (a * chi_hom + v * sqrt_b + bob) / denom
    d = (sqrt_b * v + b * chi_hom) / denom

    lambda_1, lambda_2 = _root_pair(a, b, "A/B")
    lambda_3, lambda_4 = _root_pair(c, d, "C/D")
    return SymplecticSpectrum(lambda_1, lambda_2, lambda_3, lambda_4, 1.0, a=a, b=b, c=c, d=d)


def _g_of_eigenvalue(lam: float) -> float:
    # Eigenvalues within tolerance of the floor count as pure.
    return g_function(max((lam - 1) / 2, 0.0))


def holevo_bound(spec: SymplecticSpectrum) -> float:
    l1, l2, l3, l4, l5 = spec.eigenvalues
    return (
        _g_of_eigenvalue(l1)
        + _g_of_eigenvalue(l2)
        - _g_of_eigenvalue(l3)
        - _g_of_eigenvalue(l4)
        - _g_of_eigenvalue(l5)
    )


def finite_size_delta(n: int, eps_bar: float, eps_pa: float) -> float:
    if not n >= 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return 7 * math.sqrt(math.log2(1 / eps_bar) / n) + (2 / n) * math.log2(1 / eps_pa)


def secret_key_rate(v_a0: float, ch_est: ChannelEstimate, sys: SystemParams) -> KeyRateReport:
    noise = NoiseBudget.from_channel(ch_est.t_est, ch_est.eps_est, sys.eta, sys.nu_el)
    i_ab = mutual_information(v_a0, noise)
    spectrum = symplectic_spectrum(v_a0, ch_est.t_min, ch_est.eps_max, sys)
    s_be = holevo_bound(spectrum)
    delta_n = finite_size_delta(sys.n_key, sys.eps_bar, sys.eps_pa)
    key_fraction = sys.key_fraction
    return KeyRateReport(
        i_ab=i_ab,
        s_be=s_be,
        delta_n=delta_n,
        key_rate=key_fraction * (sys.beta * i_ab - s_be - delta_n),
        spectrum=spectrum,
        v=v_a0,
        t_used=ch_est.t_est,
        eps_used=ch_est.eps_est,
        t_min=ch_est.t_min,
        eps_max=ch_est.eps_max,
        beta=sys.beta,
        key_fraction=key_fraction,
    )


def key_rate(
    v_a0: float,
    t_trans: float,
    eps: float,
    sys: SystemParams,
    *,
    finite_size: bool = True,
    allow_small_m: bool = False,
) -> KeyRateReport:
    """K(V, T, eps, nu_el) with worst-case bounds from the expected estimator spread."""
    if finite_size:
        ch_est = expected_channel_estimate(v_a0, t_trans, eps, sys, allow_small_m=allow_small_m)
    else:
        ch_est = ChannelEstimate.exact(t_trans, eps)
    return secret_key_rate(v_a0, ch_est, sys)


@dataclass(frozen=True)
class KeyRateComparison:
    evaluated: KeyRateReport
    practical: KeyRateReport

    @property
    def k_e(self) -> float:
        return self.evaluated.key_rate

    @property
    def k_p(self) -> float:
        return self.practical.key_rate

    @property
    def overestimated(self) -> bool:
        return self.k_e >= self.k_p


def evaluated_vs_practical(
    true_ch: ChannelParams,
    scen: FaultAttackScenario,
    sys: SystemParams,
    *,
    finite_size: bool = True,
    allow_small_m: bool = False,
) -> KeyRateComparison:
    """Key rate Alice and Bob compute with the biased estimate against the rate they really have.

    Raises UnphysicalEstimateError when k·T > 1: the biased estimate then
    describes no channel at all.
    """
    ch = true_ch.with_intercept_resend(scen.u)
    k = scen.k
    if k * ch.t_trans > 1:
        raise UnphysicalEstimateError(f"biased transmittance k·T = {k * ch.t_trans:.6g} exceeds 1")
    evaluated = key_rate(
        sys.v_a0, k * ch.t_trans, ch.eps / k, sys, finite_size=finite_size, allow_small_m=allow_small_m
    )
    if not scen.faulted:
        # Nothing biases the estimate: both parties compute the rate they have.
        return KeyRateComparison(evaluated, evaluated)
    practical = key_rate(
        apply_fault_to_state(sys.v_a0, k), ch.t_trans, ch.eps, sys, finite_size=finite_size, allow_small_m=allow_small_m
    )
    result = KeyRateComparison(evaluated, practical)
    if not result.overestimated:
        logger.warning(
            "evaluated key rate %.6g below practical %.6g at T=%.6g, eps=%.6g, k=%s",
            result.k_e,
            result.k_p,
            true_ch.t_trans,
            true_ch.eps,
            k,
        )
    return result


# --- Covariance-matrix path ---


def _omega(modes: int) -> np.ndarray:
    return np.kron(np.eye(modes), _OMEGA_1)


def symplectic_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a 2n×2n covariance matrix, ascending."""
    gamma = np.asarray(gamma, dtype=np.float64)
    modes = gamma.shape[0] // 2
    eig = np.abs(np.linalg.eigvals(1j * _omega(modes) @ gamma))
    # Each symplectic eigenvalue appears as a ± pair.
    return np.sort(eig)[::2]


def covariance_matrix_ab(v_a0: float, t_min: float, eps_max: float) -> np.ndarray:
    """Alice-Bob covariance matrix of the entanglement-based picture at the worst-case channel."""
    v = v_a0 + 1
    c = math.sqrt(t_min * (v_a0**2 + 2 * v_a0))
    b = t_min * (v_a0 + eps_max) + 1
    eye, sigma_z = np.eye(2), np.diag([1.0, -1.0])
    return np.block([[v * eye, c * sigma_z], [c * sigma_z, b * eye]])


def conditional_covariance(v_a0: float, t_min: float, eps_max: float, sys: SystemParams) -> np.ndarray:
    """A-F-G covariance matrix conditioned on Bob's homodyne outcome.

    The detector is a beam splitter of transmittance eta mixing Bob's mode
    with one half (F0) of an EPR pair (F0, G) whose variance reproduces the
    electronic noise.
    """
    eta, nu_el = sys.eta, sys.nu_el
    if eta == 1:
        if nu_el != 0:
            raise ParameterError("electronic noise cannot be modelled by a unit-efficiency beam splitter")
        v_el = 1.0
    else:
        v_el = 1 + nu_el / (1 - eta)
    w = math.sqrt(v_el**2 - 1)
    eye, sigma_z = np.eye(2), np.diag([1.0, -1.0])
    zero = np.zeros((2, 2))

    # Mode order A, B1, F0, G.
    gamma_ab = covariance_matrix_ab(v_a0, t_min, eps_max)
    gamma = np.block(
        [
            [gamma_ab[:2, :2], gamma_ab[:2, 2:], zero, zero],
            [gamma_ab[2:, :2], gamma_ab[2:, 2:], zero, zero],
            [zero, zero, v_el * eye, w * sigma_z],
            [zero, zero, w * sigma_z, v_el * eye],
        ]
    )
    st, sr = math.sqrt(eta), math.sqrt(1 - eta)
    splitter = np.block(
        [
            [eye, zero, zero, zero],
            [zero, st * eye, sr * eye, zero],
            [zero, -sr * eye, st * eye, zero],
            [zero, zero, zero, eye],
        ]
    )
    out = splitter @ gamma @ splitter.T

    keep = [0, 1, 4, 5, 6, 7]
    gamma_afg = out[np.ix_(keep, keep)]
    sigma = out[np.ix_(keep, [2, 3])]
    gamma_b = out[2:4, 2:4]
    # Homodyne on x: Moore-Penrose inverse of X·gamma_B·X.
    projector = np.array([[1.0 / gamma_b[0, 0], 0.0], [0.0, 0.0]])
    return gamma_afg - sigma @ projector @ sigma.T


def numeric_spectrum(v_a0: float, t_min: float, eps_max: float, sys: SystemParams) -> np.ndarray:
    """All five eigenvalues from the covariance matrices, ordered like SymplecticSpectrum."""
    ab = symplectic_eigenvalues(covariance_matrix_ab(v_a0, t_min, eps_max))[::-1]
    # The conditional state of three modes purified by two has one unit eigenvalue.
    cond = symplectic_eigenvalues(conditional_covariance(v_a0, t_min, eps_max, sys))[::-1]
    return np.array([ab[0], ab[1], cond[0], cond[1], cond[2]])
