"""Receive chains: dechirp, brick-wall low-pass + ADC, group-delay alignment,
decoding, range and range-Doppler processing.

Three chains share the stages:

* ``PROPOSED``: the transmitter pre-compensated the code; the receiver
  group-delay filters, shifts every envelope to ``tau_max`` and decodes with a
  reference delayed by ``tau_max``.
* ``LEGACY``: uncompensated transmitter; group-delay filter then decode with
  an undelayed reference, so the filter's quadratic dispersion stays on the
  code.
* ``FMCW``: dechirp and low-pass only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .channel import SPEED_OF_LIGHT, Target, propagate, velocity_for_doppler
from .coding import PhaseCode, coded_envelope, compensate_phase_lag
from .signal import (
    ComplexBaseband,
    TransferFunction,
    apply_transfer,
    bin_frequencies,
    chebyshev_window,
    decimate,
    delay_response,
    fractional_delay,
    to_db,
)
from .waveform import ChirpParams, fmcw_chirp, pc_fmcw

__all__ = [
    "Chain",
    "ReceiverConfig",
    "RangeProfile",
    "RangeDopplerMap",
    "dechirp",
    "lowpass_and_sample",
    "min_cutoff",
    "group_delay_response",
    "group_delay_filter",
    "shift_to_max_delay",
    "decode_reference",
    "decode",
    "receive",
    "range_profile",
    "range_doppler",
    "window_mainlobe_halfwidth",
    "transmit",
    "proposed_chain",
    "legacy_chain",
    "fmcw_chain",
    "doppler_tolerance_sweep",
]


class Chain(str, enum.Enum):
    PROPOSED = "proposed"
    LEGACY = "legacy"
    FMCW = "fmcw"

    @classmethod
    def parse(cls, value: Union[str, "Chain"]) -> "Chain":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown chain {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class ReceiverConfig:
    """Receiver settings.

    Args:
        f_cut: two-sided LPF width in Hz (passes ``|f| <= f_cut/2``).
        f_s: complex ADC rate in Hz; defaults to ``f_cut``.
        f_b_max: largest beat frequency of interest; defaults to ``f_s/2``.
        window_sidelobe_db: Chebyshev sidelobe level for range/Doppler FFTs.
    """

    f_cut: float
    f_s: Optional[float] = None
    f_b_max: Optional[float] = None
    window_sidelobe_db: float = 100.0

    def __post_init__(self):
        if not self.f_cut > 0:
            raise ValueError("f_cut must be positive")
        if self.f_s is None:
            object.__setattr__(self, "f_s", float(self.f_cut))
        if not self.f_s > 0:
            raise ValueError("f_s must be positive")
        if self.f_b_max is None:
            object.__setattr__(self, "f_b_max", self.f_s / 2)
        if self.f_b_max < 0 or self.f_b_max > self.f_s / 2 * (1 + 1e-12):
            raise ValueError(f"f_b_max {self.f_b_max:g} Hz must lie in [0, f_s/2]")
        if not self.window_sidelobe_db > 0:
            raise ValueError("window_sidelobe_db must be positive")

    def max_delay(self, k: float) -> float:
        return self.f_b_max / k

    def max_range(self, k: float) -> float:
        return SPEED_OF_LIGHT * self.f_b_max / (2 * k)

    def decimation(self, tx_rate: float) -> int:
        q = tx_rate / self.f_s
        if self.f_s > tx_rate or not np.isclose(q, round(q), rtol=0, atol=1e-9):
            raise ValueError(f"tx_rate {tx_rate:g} Hz is not an integer multiple of f_s {self.f_s:g} Hz")
        return int(round(q))


@dataclass(frozen=True, eq=False)
class RangeProfile:
    """Peak-normalized range profile on an fftshifted axis."""

    magnitude_db: np.ndarray
    range_axis: np.ndarray
    frequencies: np.ndarray
    mainlobe_bin: int

    @property
    def peak_range(self) -> float:
        return float(self.range_axis[self.mainlobe_bin])


@dataclass(frozen=True, eq=False)
class RangeDopplerMap:
    magnitude_db: np.ndarray  # (range, doppler)
    range_axis: np.ndarray
    velocity_axis: np.ndarray
    doppler_axis: np.ndarray

    @property
    def peak(self):
        return np.unravel_index(int(np.argmax(self.magnitude_db)), self.magnitude_db.shape)


def dechirp(rx: ComplexBaseband, p: ChirpParams) -> ComplexBaseband:
    """Mix with the conjugate of the uncoded sweep."""
    if rx.sample_rate != p.tx_rate or len(rx) != p.n_samples:
        raise ValueError(
            f"received record ({len(rx)} samples @ {rx.sample_rate:g} Hz) does not match the sweep "
            f"({p.n_samples} @ {p.tx_rate:g} Hz)"
        )
    return rx.replace(rx.samples * np.conj(fmcw_chirp(p).samples))


def lowpass_and_sample(beat: ComplexBaseband, cfg: ReceiverConfig) -> ComplexBaseband:
    """Brick-wall LPF (``|f| <= f_cut/2`` passes, edge bin included) then ADC decimation."""
    if cfg.f_cut / 2 > beat.sample_rate / 2 * (1 + 1e-12):
        raise ValueError(f"f_cut {cfg.f_cut:g} Hz exceeds the record bandwidth {beat.sample_rate:g} Hz")
    q = cfg.decimation(beat.sample_rate)
    half = cfg.f_cut / 2 * (1 + 1e-12)
    lpf = TransferFunction(lambda f: (np.abs(f) <= half).astype(float), f"rect({cfg.f_cut:g})")
    return decimate(apply_transfer(beat, lpf), q)


def min_cutoff(k_null: float, n_chips: int, sweep_time: float, bandwidth: float, max_range: float) -> float:
    """Smallest f_cut passing ``k_null`` code nulls above the farthest beat."""
    return (2 * bandwidth * max_range / SPEED_OF_LIGHT + n_chips * k_null) / sweep_time


def group_delay_response(k: float) -> TransferFunction:
    """``exp(+j pi f^2 / k)``: delays a tone at ``f`` by ``-f/k``."""
    return TransferFunction(lambda f: np.exp(1j * np.pi * f**2 / k), f"gd({k:g})")


def group_delay_filter(beat: ComplexBaseband, k: float) -> ComplexBaseband:
    return apply_transfer(beat, group_delay_response(k))


def shift_to_max_delay(beat: ComplexBaseband, cfg: ReceiverConfig, k: float) -> ComplexBaseband:
    tau = cfg.max_delay(k)
    if tau == 0:
        return beat
    return apply_transfer(beat, delay_response(tau))


def decode_reference(code: PhaseCode, p: ChirpParams, cfg: ReceiverConfig, delay: Optional[float] = None) -> ComplexBaseband:
    """Uncompensated code envelope, delayed (default ``tau_max``), low-passed and sampled."""
    env = coded_envelope(code, p.tx_rate).signal
    tau = cfg.max_delay(p.slope) if delay is None else delay
    if tau:
        env = fractional_delay(env, tau)
    return lowpass_and_sample(env, cfg)


def decode(beat: ComplexBaseband, reference: ComplexBaseband) -> ComplexBaseband:
    """Multiply by the conjugate reference."""
    if len(beat) != len(reference) or beat.sample_rate != reference.sample_rate:
        raise ValueError(
            f"reference ({len(reference)} @ {reference.sample_rate:g} Hz) does not match the beat "
            f"({len(beat)} @ {beat.sample_rate:g} Hz)"
        )
    return beat.replace(beat.samples * np.conj(reference.samples))


def receive(
    rx: ComplexBaseband,
    p: ChirpParams,
    cfg: ReceiverConfig,
    code: Optional[PhaseCode] = None,
    chain: Union[str, Chain] = Chain.PROPOSED,
    reference: Optional[ComplexBaseband] = None,
) -> ComplexBaseband:
    """Run one received sweep through a chain up to (not including) the range FFT."""
    chain = Chain.parse(chain)
    beat = lowpass_and_sample(dechirp(rx, p), cfg)
    if chain is Chain.FMCW or code is None:
        return beat
    k = p.slope
    beat = group_delay_filter(beat, k)
    if chain is Chain.PROPOSED:
        beat = shift_to_max_delay(beat, cfg, k)
        ref = reference if reference is not None else decode_reference(code, p, cfg)
    else:
        ref = reference if reference is not None else decode_reference(code, p, cfg, delay=0.0)
    return decode(beat, ref)


def _range_axis(freqs: np.ndarray, k: float) -> np.ndarray:
    return SPEED_OF_LIGHT * freqs / (2 * k)


def range_profile(beat: ComplexBaseband, cfg: ReceiverConfig, k: float) -> RangeProfile:
    """Chebyshev-windowed FFT, magnitude in dB normalized to the peak."""
    n = len(beat)
    w = chebyshev_window(n, cfg.window_sidelobe_db)
    X = np.fft.fftshift(np.fft.fft(beat.samples * w))
    f = np.fft.fftshift(bin_frequencies(n, beat.sample_rate))
    mag = to_db(X)
    return RangeProfile(mag, _range_axis(f, k), f, int(np.argmax(mag)))


def range_doppler(
    decoded_pulses: Sequence[ComplexBaseband],
    cfg: ReceiverConfig,
    k: float,
    pri: float,
    carrier_frequency: float,
) -> RangeDopplerMap:
    """Range FFT per pulse, then slow-time FFT per range bin, windowed in both."""
    if not decoded_pulses:
        raise ValueError("no pulses")
    lengths = {len(x) for x in decoded_pulses}
    if len(lengths) != 1:
        raise ValueError(f"ragged pulse lengths {sorted(lengths)}")
    n, m = lengths.pop(), len(decoded_pulses)
    fs = decoded_pulses[0].sample_rate
    data = np.stack([x.samples for x in decoded_pulses], axis=1)  # (fast, slow)
    data = data * chebyshev_window(n, cfg.window_sidelobe_db)[:, None]
    if m > 1:
        data = data * chebyshev_window(m, cfg.window_sidelobe_db)[None, :]
    X = np.fft.fftshift(np.fft.fft2(data), axes=(0, 1))
    f = np.fft.fftshift(bin_frequencies(n, fs))
    fd = np.fft.fftshift(np.fft.fftfreq(m, pri))
    v = velocity_for_doppler(fd, carrier_frequency)
    return RangeDopplerMap(to_db(X), _range_axis(f, k), v, fd)


def window_mainlobe_halfwidth(n: int, sidelobe_db: float, oversample: int = 16) -> int:
    """Bins from the peak until the window's spectrum first falls to ``-sidelobe_db``."""
    w = chebyshev_window(n, sidelobe_db)
    W = to_db(np.fft.fft(w, n * oversample))
    below = np.nonzero(W[: n * oversample // 2] <= -sidelobe_db + 1e-6)[0]
    if below.size == 0:
        raise ValueError("window spectrum never reaches its sidelobe level")
    return int(np.ceil(below[0] / oversample))


def transmit(p: ChirpParams, code: Optional[PhaseCode], chain: Union[str, Chain], t0: float = 0.0) -> ComplexBaseband:
    """Transmit record matching a chain (compensated only for ``PROPOSED``)."""
    chain = Chain.parse(chain)
    if code is None or chain is Chain.FMCW:
        return fmcw_chirp(p, t0)
    env = coded_envelope(code, p.tx_rate)
    if chain is Chain.PROPOSED:
        env = compensate_phase_lag(env, p.slope)
    return pc_fmcw(p, env, t0)


def _chain_profile(rx, p, cfg, code, chain) -> RangeProfile:
    return range_profile(receive(rx, p, cfg, code, chain), cfg, p.slope)


def proposed_chain(rx: ComplexBaseband, p: ChirpParams, cfg: ReceiverConfig, code: PhaseCode) -> RangeProfile:
    return _chain_profile(rx, p, cfg, code, Chain.PROPOSED)


def legacy_chain(rx: ComplexBaseband, p: ChirpParams, cfg: ReceiverConfig, code: Optional[PhaseCode]) -> RangeProfile:
    return _chain_profile(rx, p, cfg, code, Chain.LEGACY)


def fmcw_chain(rx: ComplexBaseband, p: ChirpParams, cfg: ReceiverConfig) -> RangeProfile:
    return _chain_profile(rx, p, cfg, None, Chain.FMCW)


def doppler_tolerance_sweep(
    p: ChirpParams,
    cfg: ReceiverConfig,
    code: Optional[PhaseCode],
    target: Target,
    doppler_grid: Sequence[float],
    chain: Union[str, Chain] = Chain.PROPOSED,
) -> List[RangeProfile]:
    """Range profile of one target for each Doppler shift (Hz), nominal reference."""
    chain = Chain.parse(chain)
    tx = transmit(p, code, chain)
    ref = None
    if code is not None and chain is not Chain.FMCW:
        ref = decode_reference(code, p, cfg, None if chain is Chain.PROPOSED else 0.0)
    out = []
    for fd in doppler_grid:
        tgt = Target(target.range, velocity_for_doppler(fd, p.carrier_frequency), target.amplitude)
        rx = propagate(tx, [tgt], p)
        out.append(range_profile(receive(rx, p, cfg, code, chain, ref), cfg, p.slope))
    return out
