import math
from collections.abc import Iterator
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple

import numpy as np

Units = Literal["snu", "voltage"]

# Symplectic eigenvalues may undershoot 1 by this much before the state is rejected.
HEISENBERG_TOLERANCE = 1e-9


class ParameterError(ValueError):
    """An input outside the physical or protocol domain."""


class UnphysicalEstimateError(ParameterError):
    """A channel estimate that describes no physical state."""


class NumericalDegeneracyError(ArithmeticError):
    """Cancellation left a negative discriminant beyond tolerance."""


def _check_probability(name: str, value: float) -> None:
    if not 0 < value < 1:
        raise ParameterError(f"{name} must be in (0, 1), got {value}")


@dataclass(frozen=True)
class SystemParams:
    """Protocol and detector constants. Noise quantities are in shot-noise units."""

    v_a0: float = 4.0
    eta: float = 0.5
    nu_el: float = 0.01
    beta: float = 0.95
    n_total: int = 10**9
    m_est: int = 5 * 10**8
    eps_pe: float = 1e-10
    eps_bar: float | None = None
    eps_pa: float | None = None
    n0: float = 1.0

    def __post_init__(self) -> None:
        # Smoothing and privacy-amplification failure probabilities follow eps_pe unless given.
        if self.eps_bar is None:
            object.__setattr__(self, "eps_bar", self.eps_pe)
        if self.eps_pa is None:
            object.__setattr__(self, "eps_pa", self.eps_pe)

        if not self.v_a0 > 0:
            raise ParameterError(f"v_a0 must be positive, got {self.v_a0}")
        if not 0 < self.eta <= 1:
            raise ParameterError(f"eta must be in (0, 1], got {self.eta}")
        if not self.nu_el >= 0:
            raise ParameterError(f"nu_el must be non-negative, got {self.nu_el}")
        if not 0 < self.beta < 1:
            raise ParameterError(f"beta must be in (0, 1), got {self.beta}")
        if not 0 < self.m_est < self.n_total:
            raise ParameterError(f"m_est must satisfy 0 < m_est < n_total, got {self.m_est} and {self.n_total}")
        _check_probability("eps_pe", self.eps_pe)
        _check_probability("eps_bar", self.eps_bar)
        _check_probability("eps_pa", self.eps_pa)
        if not self.n0 > 0:
            raise ParameterError(f"n0 must be positive, got {self.n0}")

    @property
    def n_key(self) -> int:
        return self.n_total - self.m_est

    @property
    def key_fraction(self) -> float:
        return self.n_key / self.n_total

    def with_values(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelParams:
    t_trans: float
    eps: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.t_trans <= 1:
            raise ParameterError(f"t_trans must be in (0, 1], got {self.t_trans}")
        if not self.eps >= 0:
            raise ParameterError(f"eps must be non-negative, got {self.eps}")

    @classmethod
    def from_distance(cls, d_km: float, eps: float = 0.0, loss_db_per_km: float = 0.2) -> "ChannelParams":
        from voasim.units import distance_to_transmissivity

        return cls(distance_to_transmissivity(d_km, loss_db_per_km), eps)

    def xi(self, n0: float = 1.0) -> float:
        """Excess noise in absolute units."""
        return self.eps * n0

    def with_intercept_resend(self, u: float) -> "ChannelParams":
        """Channel as Alice and Bob see it while a fraction u of pulses is intercepted."""
        if not 0 <= u <= 1:
            raise ParameterError(f"u must be in [0, 1], got {u}")
        return replace(self, eps=self.eps + 2 * u)


@dataclass(frozen=True)
class FaultAttackScenario:
    k: float = 1.0
    u: float = 0.0

    def __post_init__(self) -> None:
        if not self.k >= 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not 0 <= self.u <= 1:
            raise ParameterError(f"u must be in [0, 1], got {self.u}")

    @property
    def faulted(self) -> bool:
        return self.k > 1


# --- Samples ---


class QuadraturePair(NamedTuple):
    x_alice: float
    x_bob: float


@dataclass(frozen=True)
class SampleMeta:
    sys: SystemParams
    channel: ChannelParams
    scenario: FaultAttackScenario
    seed: int
    rng: str = "PCG64"
    resend_model: str = "gaussian"
    batch_seeds: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Paired quadrature records. Arrays are read-only once the set is built."""

    x_alice: np.ndarray
    x_bob: np.ndarray
    units: Units = "snu"
    n0: float = 1.0
    meta: SampleMeta | None = None

    def __post_init__(self) -> None:
        x_alice = np.array(self.x_alice, dtype=np.float64)
        x_bob = np.array(self.x_bob, dtype=np.float64)
        if x_alice.ndim != 1 or x_alice.shape != x_bob.shape:
            raise ParameterError(f"x_alice and x_bob must be 1-D and equal length: {x_alice.shape}, {x_bob.shape}")
        if x_alice.size == 0:
            raise ParameterError("SampleSet must not be empty")
        if not (np.all(np.isfinite(x_alice)) and np.all(np.isfinite(x_bob))):
            raise ParameterError("SampleSet values must be finite")
        if self.units not in ("snu", "voltage"):
            raise ParameterError(f"units must be 'snu' or 'voltage', got {self.units!r}")
        if self.units == "snu" and self.n0 != 1.0:
            raise ParameterError(f"SNU samples have n0 = 1, got {self.n0}")
        x_alice.flags.writeable = False
        x_bob.flags.writeable = False
        object.__setattr__(self, "x_alice", x_alice)
        object.__setattr__(self, "x_bob", x_bob)

    def __len__(self) -> int:
        return self.x_alice.size

    def __iter__(self) -> Iterator[QuadraturePair]:
        for a, b in zip(self.x_alice.tolist(), self.x_bob.tolist(), strict=True):
            yield QuadraturePair(a, b)

    @property
    def pairs(self) -> list[QuadraturePair]:
        return list(self)

    @classmethod
    def from_pairs(cls, pairs, units: Units = "snu", n0: float = 1.0) -> "SampleSet":
        arr = np.asarray(list(pairs), dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], units=units, n0=n0)

    def subset(self, idx: np.ndarray) -> "SampleSet":
        return SampleSet(self.x_alice[idx], self.x_bob[idx], units=self.units, n0=self.n0, meta=self.meta)


# --- Estimates ---


@dataclass(frozen=True)
class MlEstimate:
    t_hat: float
    sigma2_hat: float
    m_used: int
    sum_x2: float
    delta_t: float = 0.0
    delta_sigma2: float = 0.0
    n0: float = 1.0

    def __post_init__(self) -> None:
        if self.m_used < 2:
            raise ParameterError(f"m_used must be >= 2, got {self.m_used}")
        if not self.sigma2_hat >= 0:
            raise ParameterError(f"sigma2_hat must be non-negative, got {self.sigma2_hat}")
        if not (self.delta_t >= 0 and self.delta_sigma2 >= 0):
            raise ParameterError(f"half-widths must be non-negative, got {self.delta_t}, {self.delta_sigma2}")

    @property
    def v_x(self) -> float:
        """Alice-side variance of the estimation records."""
        return self.sum_x2 / self.m_used


@dataclass(frozen=True)
class ChannelEstimate:
    t_est: float
    eps_est: float
    t_min: float
    eps_max: float
    m_used: int = 0

    def __post_init__(self) -> None:
        values = (self.t_est, self.eps_est, self.t_min, self.eps_max)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError(f"channel estimate must be finite, got {values}")
        if self.t_min > self.t_est or self.eps_max < self.eps_est:
            raise ParameterError(f"worst-case bounds on the wrong side: {self}")

    @classmethod
    def exact(cls, t_trans: float, eps: float) -> "ChannelEstimate":
        return cls(t_trans, eps, t_trans, eps)

    @property
    def is_physical(self) -> bool:
        return 0 < self.t_min <= 1

    def debiased(self, k: float) -> "ChannelEstimate":
        """Undo the attenuation fault: transmissivities over k, excess noise times k."""
        return ChannelEstimate(self.t_est / k, self.eps_est * k, self.t_min / k, self.eps_max * k, self.m_used)


# --- Key rate ---


@dataclass(frozen=True)
class NoiseBudget:
    chi_line: float
    chi_hom: float
    chi_tot: float

    @classmethod
    def from_channel(cls, t_trans: float, eps: float, eta: float, nu_el: float) -> "NoiseBudget":
        if not t_trans > 0:
            raise ParameterError(f"t_trans must be positive, got {t_trans}")
        chi_line = 1 / t_trans - 1 + eps
        chi_hom = (1 - eta + nu_el) / eta
        return cls(chi_line, chi_hom, chi_line + chi_hom / t_trans)


@dataclass(frozen=True)
class SymplecticSpectrum:
    lambda_1: float
    lambda_2: float
    lambda_3: float
    lambda_4: float
    lambda_5: float
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        floor = 1 - HEISENBERG_TOLERANCE
        if any(not lam >= floor for lam in self.eigenvalues):
            raise UnphysicalEstimateError(f"symplectic eigenvalue below 1: {self.eigenvalues}")

    @property
    def eigenvalues(self) -> tuple[float, float, float, float, float]:
        return (self.lambda_1, self.lambda_2, self.lambda_3, self.lambda_4, self.lambda_5)


@dataclass(frozen=True)
class KeyRateReport:
    i_ab: float
    s_be: float
    delta_n: float
    key_rate: float
    spectrum: SymplecticSpectrum
    v: float
    t_used: float
    eps_used: float
    t_min: float
    eps_max: float
    beta: float
    key_fraction: float

    @property
    def clamped(self) -> float:
        return max(self.key_rate, 0.0)


# --- Attacks ---


@dataclass(frozen=True)
class MaskingAnalysis:
    eps_technical: float
    u: float
    k: float
    eps_alarm: float
    eps_with_attack: float
    eps_observed: float
    k_required_to_mask: float
    attack_hidden: bool


# --- Monitor ---


@dataclass(frozen=True)
class DetectorCalibration:
    p_lo: float = 1.0
    rho: float = 1.0
    g: float = 1.0
    bandwidth: float = 1.0
    h: float = 1.0
    f: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_lo", "rho", "g", "bandwidth", "h", "f"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterError(f"calibration constant {name} must be positive, got {value}")

    @property
    def gain(self) -> float:
        """Voltage variance per unit of quadrature variance."""
        return self.p_lo * self.rho**2 * self.g**2 * self.bandwidth * self.h * self.f


@dataclass(frozen=True)
class MonitorReading:
    var_raw: float
    var_corrected: float
    v_m: float
    v_p: float
    k_hat: float
    n_u: int
    below_nominal: bool = False
    below_shot_noise: bool = False

    def __post_init__(self) -> None:
        if self.n_u < 2:
            raise ParameterError(f"n_u must be >= 2, got {self.n_u}")


@dataclass(frozen=True)
class MonteCarloSummary:
    scenario: str
    rows: list[dict] = field(default_factory=list)
    mean: float = 0.0
    stderr: float = 0.0
    target: float = 0.0
    coverage: float | None = None
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())
