"""Point-target propagation, a synchronized second radar, and receiver noise.

Echo model.  The transmit record is split into its code envelope
``s(t) = x_T(t) * exp(+j pi k t^2)`` and the sweep.  The envelope is delayed
circularly (the same code repeats every sweep), while the sweep is delayed
analytically, ``exp(-j pi k (t - tau_0)^2)``, so the dechirped echo is an
exact tone over the whole record.  Doppler is a tone ``exp(j 2 pi f_d t)``
evaluated on absolute time, which also gives the pulse-to-pulse phase
progression.  Envelope time dilation is neglected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .coding import CodedEnvelope
from .signal import ComplexBaseband, fractional_delay
from .waveform import ChirpParams, chirp_phase, fmcw_chirp, pc_fmcw

__all__ = [
    "SPEED_OF_LIGHT",
    "Target",
    "Interferer",
    "doppler_frequency",
    "velocity_for_doppler",
    "delayed_echo",
    "propagate",
    "add_interferer",
    "add_awgn",
]


def doppler_frequency(velocity: float, carrier_frequency: float) -> float:
    """``f_d = 2 v f_c / c`` (sign as used in the echo model)."""
    return 2.0 * velocity * carrier_frequency / SPEED_OF_LIGHT


def velocity_for_doppler(f_d: float, carrier_frequency: float) -> float:
    return f_d * SPEED_OF_LIGHT / (2.0 * carrier_frequency)


@dataclass(frozen=True)
class Target:
    """Point scatterer.

    Args:
        range: R_0 in metres.
        velocity: v_0 in m/s.
        amplitude: complex reflection amplitude.
    """

    range: float
    velocity: float = 0.0
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.range < 0:
            raise ValueError(f"target range must be non-negative, got {self.range}")
        if abs(self.velocity) >= 1e-3 * SPEED_OF_LIGHT:
            raise ValueError("target velocity must be far below the speed of light")

    @property
    def delay(self) -> float:
        return 2.0 * self.range / SPEED_OF_LIGHT

    def doppler(self, carrier_frequency: float) -> float:
        return doppler_frequency(self.velocity, carrier_frequency)


@dataclass(frozen=True)
class Interferer:
    """Second radar sharing the victim's sweep.

    Args:
        envelope: the interferer's code envelope at the transmit rate.
        delay: one-way path delay in seconds.
        amplitude: complex gain at the victim receiver.
        sync_offset: extra chirp-start offset in seconds (0 = fully synchronized).
    """

    envelope: CodedEnvelope
    delay: float
    amplitude: complex = 1.0
    sync_offset: float = 0.0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("interferer delay must be non-negative")


def _envelope_of(tx: ComplexBaseband, p: ChirpParams) -> ComplexBaseband:
    if tx.sample_rate != p.tx_rate or len(tx) != p.n_samples:
        raise ValueError(
            f"transmit record ({len(tx)} samples @ {tx.sample_rate:g} Hz) is not one sweep "
            f"({p.n_samples} samples @ {p.tx_rate:g} Hz)"
        )
    return tx.replace(tx.samples * np.conj(fmcw_chirp(p).samples))


def delayed_echo(
    env: ComplexBaseband,
    p: ChirpParams,
    delay: float,
    amplitude: complex = 1.0,
    doppler: float = 0.0,
) -> ComplexBaseband:
    """``amplitude * s(t - delay) * exp(-j pi k (t - delay)^2) * exp(j 2 pi f_d (t0 + t))``."""
    if delay >= env.duration:
        raise ValueError(f"delay {delay:g} s exceeds the record length {env.duration:g} s")
    t = env.local_time
    s = fractional_delay(env, delay).samples
    x = amplitude * s * np.exp(1j * chirp_phase(p, t - delay))
    if doppler:
        x = x * np.exp(2j * np.pi * doppler * (env.t0 + t))
    return env.replace(x)


def propagate(tx: ComplexBaseband, targets: Sequence[Target], p: ChirpParams) -> ComplexBaseband:
    """Sum of point-target echoes of one transmitted sweep.

    An empty target list yields an all-zero record.
    """
    env = _envelope_of(tx, p)
    out = np.zeros(len(tx), dtype=np.complex128)
    for tgt in targets:
        out += delayed_echo(env, p, tgt.delay, tgt.amplitude, tgt.doppler(p.carrier_frequency)).samples
    return tx.replace(out)


def add_interferer(rx: ComplexBaseband, intf: Interferer, p: ChirpParams) -> ComplexBaseband:
    """Add a second radar's coded sweep, delayed by ``delay + sync_offset``."""
    if intf.amplitude == 0:
        return rx
    env = intf.envelope.signal
    if env.sample_rate != rx.sample_rate or len(env) != len(rx):
        raise ValueError("interferer envelope must match the received record")
    # validates the envelope against the sweep grid
    pc_fmcw(p, intf.envelope)
    echo = delayed_echo(env, p, intf.delay + intf.sync_offset, intf.amplitude)
    return rx.replace(rx.samples + echo.samples)


def add_awgn(rx: ComplexBaseband, snr_db: float, seed: Optional[int] = None) -> ComplexBaseband:
    """Circular complex Gaussian noise at ``snr_db`` below the record's mean power.

    ``snr_db = inf`` returns ``rx`` unchanged.
    """
    if np.isposinf(snr_db):
        return rx
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    power = np.mean(np.abs(rx.samples) ** 2)
    if power == 0:
        raise ValueError("cannot set an SNR on an all-zero record")
    sigma2 = power / 10 ** (snr_db / 10)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(rx)) + 1j * rng.standard_normal(len(rx))
    return rx.replace(rx.samples + np.sqrt(sigma2 / 2) * noise)
