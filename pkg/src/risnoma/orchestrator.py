"""Alternating optimization driver and single-trial entry point.

One outer iteration solves the beamformer subproblem at fixed phases and
then the phase subproblem at fixed beamformers.  The loop stops when the
total-power decrease falls below epsilon, the phase step fails, or the
iteration cap is reached.  Baseline variants reuse the same machinery with
the phase step disabled (random phases, no RIS) or with both steps swapped
for their SDR counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .beamforming import (
    BeamformingResult,
    LiftedBeamformers,
    solve_beamformers_dc,
    solve_beamformers_sdr,
)
from .channel import (
    BeamformerSet,
    ChannelSet,
    ScenarioConfig,
    dbm_from_mw,
    generate_channels,
)
from .dc import DcTrace
from .ordering import (
    OrderingResult,
    order_direct_link,
    order_eigen,
    order_exhaustive,
    order_sdr,
)
from .phase import (
    build_phase_data,
    phase_constraints_satisfied,
    quantize_phases,
    random_phase,
    solve_phase_dc,
    solve_phase_sdr,
)


class Variant(Enum):
    DC = "dc"
    SDR = "sdr"
    RANDOM_PHASE = "random"
    NO_RIS = "noris"


class TerminationReason(Enum):
    CONVERGED = "converged"
    PHASE_INFEASIBLE = "phase_infeasible"
    MAX_ITERS = "max_iters"
    BEAMFORMING_INFEASIBLE = "beamforming_infeasible"


@dataclass
class RunResult:
    """Outcome of one optimization run on one channel realization."""

    optimizer: Variant
    ordering_scheme: str
    ordering: tuple
    termination_reason: TerminationReason
    outer_iterations: int
    power_trace_mw: tuple  # accepted total power per outer iteration
    total_power_mw: float | None
    beamformers: BeamformerSet | None
    phases: np.ndarray | None
    quantization_bits: int | None = None  # None = continuous
    lifted_beamformers: LiftedBeamformers | None = None
    lifted_phase_penalty: float | None = None
    beamformer_traces: tuple = ()
    phase_traces: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.total_power_mw is not None

    @property
    def total_power_dbm(self) -> float | None:
        return None if self.total_power_mw is None else float(dbm_from_mw(self.total_power_mw))


def _beamformer_step(variant, ch_eff, users, config, init, rng) -> BeamformingResult:
    if variant is Variant.SDR:
        return solve_beamformers_sdr(ch_eff, users, config, rng)
    return solve_beamformers_dc(ch_eff, users, config, init=init)


def _effective(ch: ChannelSet, v: np.ndarray) -> np.ndarray:
    from .channel import effective_channels

    return effective_channels(ch, v)


def _infeasible_result(variant, ordering: OrderingResult) -> RunResult:
    return RunResult(
        optimizer=variant,
        ordering_scheme=ordering.scheme,
        ordering=ordering.permutation,
        termination_reason=TerminationReason.BEAMFORMING_INFEASIBLE,
        outer_iterations=0,
        power_trace_mw=(),
        total_power_mw=None,
        beamformers=None,
        phases=None,
    )


def alternate(
    config: ScenarioConfig,
    ch: ChannelSet,
    ordering: OrderingResult,
    variant: Variant,
    rng: np.random.Generator,
) -> RunResult:
    """Run one optimization variant from seeded random initial phases.

    The power decrease is checked after each beamformer step (phase steps
    leave the power unchanged); a failed phase step ends the run with the
    last feasible (beamformers, phases) pair retained.
    """
    users = ordering.permutation
    if variant is Variant.NO_RIS:
        ch = ch.without_ris()
    theta0 = random_phase(config.N, rng)

    single_step = variant in (Variant.NO_RIS, Variant.RANDOM_PHASE) or config.N == 0
    v = theta0
    bres = _beamformer_step(variant, _effective(ch, v), users, config, None, rng)
    if not bres.ok:
        return _infeasible_result(variant, ordering)

    power = bres.total_power
    trace = [power]
    btraces = [bres.trace] if bres.trace else []
    ptraces: list[DcTrace] = []
    bf, lifted = bres.beamformers, bres.lifted
    phase_pen = None
    # the SDR variant is not monotone, so remember its best feasible iterate
    best = (power, bf, v, lifted, phase_pen)
    reason = TerminationReason.CONVERGED if single_step else TerminationReason.MAX_ITERS

    if not single_step:
        for _ in range(1, config.max_outer_iters):
            data = build_phase_data(ch, bf)
            if variant is Variant.DC:
                pres = solve_phase_dc(data, config)
            else:
                pres = solve_phase_sdr(data, config, rng)
            if not pres.ok:
                if variant is Variant.DC and phase_constraints_satisfied(data, v, config):
                    # rank-one detection stalled, but the incumbent phases
                    # remain feasible: keep them and let the power decrease
                    # test end the run
                    pres = None
                else:
                    reason = TerminationReason.PHASE_INFEASIBLE
                    break
            if pres is not None:
                v = pres.v
                if pres.trace:
                    ptraces.append(pres.trace)
                if pres.lifted is not None:
                    phase_pen = pres.lifted.penalty

            warm = LiftedBeamformers.from_vectors(bf.w) if variant is Variant.DC else None
            bres = _beamformer_step(variant, _effective(ch, v), users, config, warm, rng)
            if not bres.ok:
                reason = TerminationReason.BEAMFORMING_INFEASIBLE
                break
            new_power = bres.total_power
            if variant is Variant.DC and new_power > power:
                # solver-noise ascent at the fixed point: keep the previous iterate
                reason = TerminationReason.CONVERGED
                break
            bf, lifted = bres.beamformers, bres.lifted
            if bres.trace:
                btraces.append(bres.trace)
            trace.append(new_power)
            decrease = power - new_power
            power = new_power
            if new_power < best[0]:
                best = (new_power, bf, v, lifted, phase_pen)
            # relative decrease test: keeps the threshold meaningful at any
            # power scale (the per-solve noise floor grows with the power)
            if decrease < config.epsilon * max(1.0, trace[-2]):
                reason = TerminationReason.CONVERGED
                break

    if variant is Variant.SDR and best[0] < power:
        power, bf, v, lifted, phase_pen = best

    return RunResult(
        optimizer=variant,
        ordering_scheme=ordering.scheme,
        ordering=users,
        termination_reason=reason,
        outer_iterations=len(trace),
        power_trace_mw=tuple(trace),
        total_power_mw=power,
        beamformers=bf,
        phases=None if variant is Variant.NO_RIS else v,
        lifted_beamformers=lifted,
        lifted_phase_penalty=phase_pen,
        beamformer_traces=tuple(btraces),
        phase_traces=tuple(ptraces),
    )


# Stream tags for per-trial substreams; every source of randomness in a
# trial is keyed by (seed parts..., tag) so schemes share realizations.
_STREAM_CHANNELS = 0
_STREAM_ALTERNATE = 1

ORDERING_SCHEMES = ("direct", "eigen", "sdr", "exhaustive")


def _seed_tuple(seed) -> tuple:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def trial_rng(seed, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(_seed_tuple(seed) + (stream,)))


def _apply_ordering_scheme(scheme, config, ch, pipeline) -> OrderingResult:
    if scheme == "direct":
        return order_direct_link(ch)
    if scheme == "eigen":
        return order_eigen(ch, config)
    if scheme == "sdr":
        return order_sdr(ch, config)
    if scheme == "exhaustive":
        return order_exhaustive(ch, config, pipeline)[0]
    raise ValueError(f"unknown ordering scheme {scheme!r}")


def _quantize_and_resolve(config, ch, result: RunResult, bits: int, rng) -> RunResult:
    """Snap the optimized phases to the discrete lattice and re-solve the
    beamformers once for the quantized phases."""
    vq = quantize_phases(result.phases, bits)
    bres = _beamformer_step(
        result.optimizer, _effective(ch, vq), result.ordering, config, None, rng
    )
    if not bres.ok:
        return replace(
            result,
            termination_reason=TerminationReason.BEAMFORMING_INFEASIBLE,
            total_power_mw=None,
            beamformers=None,
            phases=vq,
            quantization_bits=bits,
            lifted_beamformers=None,
            lifted_phase_penalty=None,
        )
    return replace(
        result,
        total_power_mw=bres.total_power,
        beamformers=bres.beamformers,
        phases=vq,
        quantization_bits=bits,
        lifted_beamformers=bres.lifted,
    )


def run_trial(
    config: ScenarioConfig,
    seed,
    ordering_scheme: str = "eigen",
    variant: Variant = Variant.DC,
    bits: int | None = None,
) -> RunResult:
    """One Monte Carlo cell: draw channels, order users, alternate, and
    optionally evaluate with quantized phases.

    `seed` may be an int or a tuple of ints; identical (config, seed)
    always produce identical results.  The channel substream does not
    depend on the variant or ordering scheme, so different methods compare
    on common realizations.
    """
    if isinstance(variant, str):
        variant = Variant(variant)
    ch = generate_channels(config, trial_rng(seed, _STREAM_CHANNELS))

    def pipeline(perm):
        forced = OrderingResult(permutation=tuple(perm), criterion=None, scheme="exhaustive")
        res = alternate(config, ch, forced, variant, trial_rng(seed, _STREAM_ALTERNATE))
        return res.total_power_mw

    ordering = _apply_ordering_scheme(ordering_scheme, config, ch, pipeline)
    rng = trial_rng(seed, _STREAM_ALTERNATE)
    result = alternate(config, ch, ordering, variant, rng)
    if bits is not None and result.feasible and config.N > 0 and result.phases is not None:
        result = _quantize_and_resolve(config, ch, result, bits, rng)
    elif bits is not None:
        result = replace(result, quantization_bits=bits)
    return result
