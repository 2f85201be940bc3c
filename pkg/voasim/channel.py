"""Synthetic quadrature records under the normal linear channel model.

Alice records x_A0 ~ N(0, V_A0·N0). A degraded attenuator scales the
transmitted quadrature by sqrt(k); Bob measures

    x_B = sqrt(eta·T) · sqrt(k) · x_A0 + z,   var(z) = eta·T·xi + N0 + V_el

Intercept-resend adds input-referred noise of mean variance 2u·N0, either as
one Gaussian on every pulse or as a two-component mixture over intercepted
and untouched pulses.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from voasim.models import (
    ChannelParams,
    FaultAttackScenario,
    ParameterError,
    SampleMeta,
    SampleSet,
    SystemParams,
    Units,
)

logger = logging.getLogger(__name__)

RESEND_MODELS = ("gaussian", "mixture")
RNG_ALGORITHM = "PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def simulate_channel(
    sys: SystemParams,
    ch: ChannelParams,
    scen: FaultAttackScenario,
    count: int,
    seed: int,
    *,
    units: Units = "snu",
    resend_model: str = "gaussian",
) -> SampleSet:
    if count < 2:
        raise ParameterError(f"count must be >= 2, got {count}")
    if resend_model not in RESEND_MODELS:
        raise ParameterError(f"resend_model must be one of {RESEND_MODELS}, got {resend_model!r}")

    n0 = sys.n0 if units == "voltage" else 1.0
    gain = math.sqrt(sys.eta * ch.t_trans)
    noise_var = sys.eta * ch.t_trans * ch.xi(n0) + n0 + sys.nu_el * n0
    if not (math.isfinite(gain) and math.isfinite(noise_var)):
        raise ParameterError(f"non-finite channel model: gain={gain}, noise variance={noise_var}")

    rng = make_rng(seed)
    x_alice = rng.normal(0.0, math.sqrt(sys.v_a0 * n0), count)
    x_sent = math.sqrt(scen.k) * x_alice

    if resend_model == "gaussian":
        # Resend noise folded into the composite z: one draw per pulse.
        total_var = noise_var + sys.eta * ch.t_trans * 2 * scen.u * n0
        z = rng.normal(0.0, math.sqrt(total_var), count)
    else:
        intercepted = rng.random(count) < scen.u
        per_pulse_var = noise_var + intercepted * (sys.eta * ch.t_trans * 2 * n0)
        z = rng.standard_normal(count) * np.sqrt(per_pulse_var)

    x_bob = gain * x_sent + z
    logger.debug("simulated %d pulses (k=%s, u=%s, seed=%d, model=%s)", count, scen.k, scen.u, seed, resend_model)
    meta = SampleMeta(sys=sys, channel=ch, scenario=scen, seed=seed, rng=RNG_ALGORITHM, resend_model=resend_model)
    return SampleSet(x_alice, x_bob, units=units, n0=n0, meta=meta)


def split_estimation_key(sample_set: SampleSet, m: int, seed: int) -> tuple[SampleSet, SampleSet]:
    """Uniform random partition into m estimation pairs and N - m key pairs."""
    size = len(sample_set)
    if not 0 < m < size:
        raise ParameterError(f"m must satisfy 0 < m < {size}, got {m}")
    order = make_rng(seed).permutation(size)
    return sample_set.subset(np.sort(order[:m])), sample_set.subset(np.sort(order[m:]))


def concat(sets: list[SampleSet]) -> SampleSet:
    """Join seed-partitioned batches in the given order."""
    if not sets:
        raise ParameterError("nothing to concatenate")
    first = sets[0]
    if any(s.units != first.units or s.n0 != first.n0 for s in sets):
        raise ParameterError("cannot concatenate sample sets with different units")
    return SampleSet(
        np.concatenate([s.x_alice for s in sets]),
        np.concatenate([s.x_bob for s in sets]),
        units=first.units,
        n0=first.n0,
        meta=first.meta,
    )


def simulate_batches(
    sys: SystemParams,
    ch: ChannelParams,
    scen: FaultAttackScenario,
    count: int,
    seeds: Sequence[int],
    *,
    units: Units = "snu",
    resend_model: str = "gaussian",
) -> SampleSet:
    """One seeded batch per seed, sizes within one pair of each other, joined in seed order."""
    if not seeds:
        raise ParameterError("at least one seed is required")
    if len(seeds) == 1:
        return simulate_channel(sys, ch, scen, count, seeds[0], units=units, resend_model=resend_model)
    if count < 2 * len(seeds):
        raise ParameterError(f"count {count} is too small for {len(seeds)} batches of at least 2 pairs")

    base, extra = divmod(count, len(seeds))
    batches = [
        simulate_channel(sys, ch, scen, base + (i < extra), seed, units=units, resend_model=resend_model)
        for i, seed in enumerate(seeds)
    ]
    joined = concat(batches)
    logger.info("joined %d batches into %d pairs", len(batches), len(joined))
    if joined.meta is None:
        return joined
    return replace(joined, meta=replace(joined.meta, batch_seeds=tuple(seeds)))
