"""Real-time modulation-variance monitor at Alice's output.

A homodyne tap behind the attenuator turns voltage samples into the
transmitted modulation variance, recovers the attenuation factor k and
feeds the de-biased channel estimate back into the key rate.
"""

import logging
import math
import threading

import numpy as np

from voasim.channel import make_rng
from voasim.estimation import inverse_tail_coefficient
from voasim.keyrate import secret_key_rate
from voasim.models import (
    ChannelEstimate,
    DetectorCalibration,
    FaultAttackScenario,
    KeyRateReport,
    MonitorReading,
    ParameterError,
    SystemParams,
)
from voasim.units import apply_fault_to_state

logger = logging.getLogger(__name__)


def sample_variance(u) -> float:
    """Population variance <U²> − <U>², taken about the sample mean."""
    samples = np.asarray(u, dtype=np.float64)
    if samples.size < 2:
        raise ParameterError(f"need at least 2 voltage samples, got {samples.size}")
    return float(np.var(samples))


def finite_size_correction(var_raw: float, n_u: int, eps_pe: float) -> float:
    if n_u < 2:
        raise ParameterError(f"n_u must be >= 2, got {n_u}")
    z = inverse_tail_coefficient(eps_pe)
    return var_raw * (1 + z * math.sqrt(2) / math.sqrt(n_u))


def voltage_to_quadrature_variance(var_corrected: float, cal: DetectorCalibration) -> float:
    return var_corrected / cal.gain


def practical_modulation_variance(v_m: float, sys: SystemParams) -> float:
    n0 = sys.n0
    v_p = (v_m - n0 - sys.nu_el * n0) / n0
    if v_p < 0:
        logger.warning("monitor reading %.6g is below the shot-noise floor; check the calibration", v_m)
    return v_p


def recover_k(v_p: float, v_a0_preset: float) -> float:
    if not v_a0_preset > 0:
        raise ParameterError(f"preset modulation variance must be positive, got {v_a0_preset}")
    k_hat = v_p / v_a0_preset
    if k_hat < 1:
        logger.warning("recovered k = %.6g is below nominal", k_hat)
    return k_hat


def reading_from_moments(
    var_raw: float,
    n_u: int,
    sys: SystemParams,
    cal: DetectorCalibration,
    eps_pe: float | None,
) -> MonitorReading:
    var_corrected = var_raw if eps_pe is None else finite_size_correction(var_raw, n_u, eps_pe)
    v_m = voltage_to_quadrature_variance(var_corrected, cal)
    v_p = practical_modulation_variance(v_m, sys)
    k_hat = recover_k(v_p, sys.v_a0)
    return MonitorReading(
        var_raw=var_raw,
        var_corrected=var_corrected,
        v_m=v_m,
        v_p=v_p,
        k_hat=k_hat,
        n_u=n_u,
        below_nominal=k_hat < 1,
        below_shot_noise=v_p < 0,
    )


def read_monitor(
    u,
    sys: SystemParams,
    cal: DetectorCalibration | None = None,
    *,
    eps_pe: float | None = None,
) -> MonitorReading:
    """Voltage samples to a monitor reading; eps_pe=None skips the finite-size correction."""
    samples = np.asarray(u, dtype=np.float64)
    return reading_from_moments(sample_variance(samples), samples.size, sys, cal or DetectorCalibration(), eps_pe)


def simulate_monitor_voltages(
    sys: SystemParams,
    scen: FaultAttackScenario,
    cal: DetectorCalibration,
    count: int,
    seed: int,
) -> np.ndarray:
    """Tap voltages for the faulted state pushed through the detector calibration."""
    if count < 2:
        raise ParameterError(f"count must be >= 2, got {count}")
    n0 = sys.n0
    quad_var = apply_fault_to_state(sys.v_a0, scen.k) * n0 + n0 + sys.nu_el * n0
    return make_rng(seed).normal(0.0, math.sqrt(quad_var * cal.gain), count)


def corrected_key_rate(
    ch_est: ChannelEstimate,
    k_hat: float,
    v_p: float,
    sys: SystemParams,
) -> KeyRateReport:
    """Key rate from a faulted estimate once the monitor has measured k and V_p."""
    if not k_hat >= 1:
        raise ParameterError(f"k_hat must be >= 1 for de-biasing, got {k_hat}")
    return secret_key_rate(v_p, ch_est.debiased(k_hat), sys)


class VoltageMonitor:
    """Streaming accumulator: one writer appends batches, readers take snapshots.

    Batches are merged with the pairwise mean/M2 update so a snapshot never
    sees a half-applied batch.
    """

    def __init__(self, sys: SystemParams, cal: DetectorCalibration | None = None, eps_pe: float | None = None):
        self.sys = sys
        self.cal = cal or DetectorCalibration()
        self.eps_pe = eps_pe
        self._lock = threading.Lock()
        self._count = 0
        self._mean = 0.0
        self._m2 = 0.0

    def append(self, batch) -> None:
        values = np.asarray(batch, dtype=np.float64).ravel()
        if values.size == 0:
            return
        n_b = values.size
        mean_b = float(np.mean(values))
        m2_b = float(np.sum((values - mean_b) ** 2))
        with self._lock:
            n_a = self._count
            total = n_a + n_b
            delta = mean_b - self._mean
            self._mean += delta * n_b / total
            self._m2 += m2_b + delta * delta * n_a * n_b / total
            self._count = total

    @property
    def count(self) -> int:
        with self._lock:
            return self._count

    def snapshot(self) -> MonitorReading:
        with self._lock:
            count, m2 = self._count, self._m2
        if count < 2:
            raise ParameterError(f"need at least 2 voltage samples, got {count}")
        return reading_from_moments(m2 / count, count, self.sys, self.cal, self.eps_pe)
