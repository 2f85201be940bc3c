"""Same protocol constants with a physical 1550 nm tap detector.

Shot-noise variance n0 is the calibrated voltage variance of vacuum input,
so monitor readings are in volts squared.
"""

from voasim.presets.default import SCENARIO, SYSTEM

NAME = "telecom"
DESCRIPTION = "Reference system with a 1 mW LO, 0.85 A/W PIN pair and 100 MHz transimpedance detector"

CALIBRATION = {
    "p_lo": 1e-3,
    "rho": 0.85,
    "g": 1e5,
    "bandwidth": 1e8,
    "h": 6.62607015e-34,
    "f": 1.934e14,
}

_GAIN = (
    CALIBRATION["p_lo"]
    * CALIBRATION["rho"] ** 2
    * CALIBRATION["g"] ** 2
    * CALIBRATION["bandwidth"]
    * CALIBRATION["h"]
    * CALIBRATION["f"]
)

SYSTEM = {**SYSTEM, "n0": _GAIN}
SCENARIO = dict(SCENARIO)
