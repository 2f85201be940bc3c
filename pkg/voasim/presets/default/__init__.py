"""Reference system: coherent-state homodyne link at 1550 nm with a normalized tap detector.

Calibration constants multiply to 1, so monitor voltages are already in
quadrature units.
"""

NAME = "default"
DESCRIPTION = "V_A0=4, eta=0.5, nu_el=0.01, beta=0.95, eps=1e-10, m=N/2, N=1e9, normalized calibration"

SYSTEM = {
    "v_a0": 4.0,
    "eta": 0.5,
    "nu_el": 0.01,
    "beta": 0.95,
    # Block size is an assumption chosen for smooth finite-size curves.
    "n_total": 10**9,
    "m_est": 5 * 10**8,
    "eps_pe": 1e-10,
    "n0": 1.0,
}

SCENARIO = {
    "k": 1.0,
    "u": 0.0,
    "fiber_loss_db_per_km": 0.2,
}

CALIBRATION = {
    "p_lo": 1.0,
    "rho": 1.0,
    "g": 1.0,
    "bandwidth": 1.0,
    "h": 1.0,
    "f": 1.0,
}
