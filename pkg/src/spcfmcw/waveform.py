"""FMCW chirps and phase-coded FMCW frames in complex baseband.

The carrier term ``exp(-j 2 pi f_c t)`` is never sampled; ``f_c`` only enters
Doppler arithmetic.  The sweep itself is ``exp(-j pi k t^2)`` on ``[0, T)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .coding import CodedEnvelope
from .signal import ComplexBaseband

__all__ = ["ChirpParams", "FrameParams", "chirp_phase", "fmcw_chirp", "pc_fmcw", "frame"]


@dataclass(frozen=True)
class ChirpParams:
    """Linear sweep parameters.

    Args:
        carrier_frequency: f_c in Hz (bookkeeping for Doppler only).
        sweep_time: T in seconds.
        bandwidth: B in Hz.
        tx_rate: transmit-side simulation rate in Hz; must be at least 2B and
            give an integer number of samples per sweep.
    """

    carrier_frequency: float
    sweep_time: float
    bandwidth: float
    tx_rate: float

    def __post_init__(self):
        if not (self.sweep_time > 0 and self.bandwidth > 0):
            raise ValueError("sweep time and bandwidth must be positive")
        if self.tx_rate < 2 * self.bandwidth * (1 - 1e-12):
            raise ValueError(
                f"tx_rate {self.tx_rate:g} Hz is below twice the bandwidth ({2 * self.bandwidth:g} Hz)"
            )
        n = self.sweep_time * self.tx_rate
        if not np.isclose(n, round(n), rtol=0, atol=1e-6):
            raise ValueError(f"sweep of {self.sweep_time:g} s is not a whole number of samples at {self.tx_rate:g} Hz")

    @property
    def slope(self) -> float:
        """k = B / T in Hz/s."""
        return self.bandwidth / self.sweep_time

    @property
    def n_samples(self) -> int:
        return int(round(self.sweep_time * self.tx_rate))

    @property
    def wavelength(self) -> float:
        from scipy.constants import c

        return c / self.carrier_frequency


@dataclass(frozen=True)
class FrameParams:
    n_pulses: int = 1
    pulse_repetition_interval: Optional[float] = None  # None -> back-to-back (= T)

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError("n_pulses must be a positive integer")

    def pri(self, p: ChirpParams) -> float:
        return p.sweep_time if self.pulse_repetition_interval is None else self.pulse_repetition_interval


def chirp_phase(p: ChirpParams, t: np.ndarray) -> np.ndarray:
    return -np.pi * p.slope * np.asarray(t) ** 2


def fmcw_chirp(p: ChirpParams, t0: float = 0.0) -> ComplexBaseband:
    t = np.arange(p.n_samples) / p.tx_rate
    return ComplexBaseband(np.exp(1j * chirp_phase(p, t)), p.tx_rate, t0)


def pc_fmcw(p: ChirpParams, env: CodedEnvelope, t0: float = 0.0) -> ComplexBaseband:
    """Code envelope times the chirp, sample by sample."""
    sig = env.signal
    if sig.sample_rate != p.tx_rate or len(sig) != p.n_samples:
        raise ValueError(
            f"envelope ({len(sig)} samples @ {sig.sample_rate:g} Hz) does not match the sweep "
            f"({p.n_samples} samples @ {p.tx_rate:g} Hz)"
        )
    chirp = fmcw_chirp(p)
    return ComplexBaseband(sig.samples * chirp.samples, p.tx_rate, t0)


def frame(
    p: ChirpParams,
    fp: FrameParams,
    env_per_pulse: Union[CodedEnvelope, Sequence[CodedEnvelope]],
) -> List[ComplexBaseband]:
    """One coded chirp per pulse; pulse ``m`` starts at ``m * PRI``.

    A single envelope (or a one-element list) is reused for every pulse.
    """
    if isinstance(env_per_pulse, CodedEnvelope):
        envs = [env_per_pulse] * fp.n_pulses
    else:
        envs = list(env_per_pulse)
        if len(envs) == 1:
            envs = envs * fp.n_pulses
    if len(envs) != fp.n_pulses:
        raise ValueError(f"got {len(envs)} envelopes for {fp.n_pulses} pulses")
    pri = fp.pri(p)
    return [pc_fmcw(p, env, t0=m * pri) for m, env in enumerate(envs)]
