"""Binary codes and the three phase types (BPSK, Gaussian-smoothed, GMSK).

Phase synthesis happens on a uniform grid ``t_i = i / rate`` covering one
sweep ``[0, T)``.  A sample that falls exactly on a chip boundary ``n*T_c``
belongs to the following chip (right-continuous steps).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import oaconvolve

from .signal import ComplexBaseband, TransferFunction, apply_transfer

__all__ = [
    "PhaseType",
    "PhaseCode",
    "CodedEnvelope",
    "random_code",
    "load_code",
    "samples_per_sweep",
    "bpsk_phase",
    "gaussian_kernel",
    "gaussian_phase",
    "gmsk_phase",
    "code_phase",
    "coded_envelope",
    "lag_compensation_response",
    "compensate_phase_lag",
    "gaussian_envelope_spectrum",
]

# Gaussian kernel is truncated at +-KERNEL_SPAN/eta (tail mass ~1.5e-12).
KERNEL_SPAN = 5.0


class PhaseType(str, enum.Enum):
    BPSK = "bpsk"
    GAUSSIAN = "gaussian"
    GMSK = "gmsk"

    @classmethod
    def parse(cls, value: Union[str, "PhaseType"]) -> "PhaseType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown phase type {value!r}; expected one of {names}") from None


@dataclass(frozen=True, eq=False)
class PhaseCode:
    """A binary code laid over one chirp sweep.

    Args:
        bits: 0/1 sequence, one entry per chip.
        phase_type: how the chip phases are shaped.
        chip_duration: ``T_c`` in seconds; the sweep lasts ``len(bits) * T_c``.
        smoother_bandwidth: 3-dB bandwidth ``B_s`` of the Gaussian smoother in
            Hz.  Defaults to twice the chip bandwidth.
        modulation_scale: GMSK integrator gain in 1/s.  Defaults to ``1/T_c``
            so a chip held at phase level pi accrues pi radians.
    """

    bits: np.ndarray
    phase_type: PhaseType
    chip_duration: float
    smoother_bandwidth: Optional[float] = None
    modulation_scale: Optional[float] = None

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size < 1:
            raise ValueError("a code needs at least one chip")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("code bits must be 0 or 1")
        bits = bits.astype(np.int8)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "phase_type", PhaseType.parse(self.phase_type))
        if not self.chip_duration > 0:
            raise ValueError("chip duration must be positive")
        if self.smoother_bandwidth is None:
            object.__setattr__(self, "smoother_bandwidth", 2.0 / self.chip_duration)
        elif self.phase_type is not PhaseType.BPSK and not self.smoother_bandwidth > 0:
            raise ValueError("smoother bandwidth must be positive for Gaussian/GMSK codes")
        if self.modulation_scale is None:
            object.__setattr__(self, "modulation_scale", 1.0 / self.chip_duration)

    @classmethod
    def over_sweep(
        cls,
        bits,
        phase_type: Union[str, PhaseType],
        sweep_time: float,
        smoother_ratio: float = 2.0,
        smoother_bandwidth: Optional[float] = None,
        modulation_scale: Optional[float] = None,
    ) -> "PhaseCode":
        """Build a code whose chips exactly tile a sweep of ``sweep_time``.

        ``smoother_ratio`` sets ``B_s = ratio * B_c`` unless an explicit
        ``smoother_bandwidth`` is given.
        """
        bits = np.asarray(bits)
        tc = sweep_time / bits.size
        bs = smoother_bandwidth if smoother_bandwidth is not None else smoother_ratio / tc
        return cls(bits, phase_type, tc, bs, modulation_scale)

    @property
    def n_chips(self) -> int:
        return int(self.bits.size)

    @property
    def sweep_time(self) -> float:
        return self.n_chips * self.chip_duration

    @property
    def chip_bandwidth(self) -> float:
        return 1.0 / self.chip_duration

    @property
    def eta(self) -> float:
        """Gaussian sharpness ``sqrt(2 pi^2 B_s^2 / ln 2)`` in 1/s."""
        return float(np.sqrt(2.0 * np.pi**2 * self.smoother_bandwidth**2 / np.log(2.0)))

    @property
    def phases(self) -> np.ndarray:
        """Chip phases in radians (bit 0 -> 0, bit 1 -> pi)."""
        return np.pi * self.bits.astype(float)

    def with_type(self, phase_type: Union[str, PhaseType]) -> "PhaseCode":
        return PhaseCode(
            self.bits, phase_type, self.chip_duration, self.smoother_bandwidth,
            self.modulation_scale,
        )


@dataclass(frozen=True, eq=False)
class CodedEnvelope:
    """The complex code term ``s(t)`` sampled at the transmit rate."""

    signal: ComplexBaseband
    compensated: bool = False


def random_code(n_chips: int, seed: int) -> np.ndarray:
    """I.i.d. uniform bits from numpy's PCG64 generator seeded with ``seed``."""
    if n_chips < 1:
        raise ValueError("n_chips must be at least 1")
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=int(n_chips), dtype=np.int8)


def load_code(path: Union[str, Path]) -> np.ndarray:
    """Read 0/1 tokens separated by commas and/or newlines.

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    bits = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        for token in stripped.split(","):
            token = token.strip()
            if not token:
                continue
            if token not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: non-binary token {token!r}")
            bits.append(int(token))
    if not bits:
        raise ValueError(f"{path}: no code bits found")
    return np.array(bits, dtype=np.int8)


def samples_per_sweep(code: PhaseCode, rate: float) -> int:
    n = code.sweep_time * rate
    if not np.isclose(n, round(n), rtol=0, atol=1e-6):
        raise ValueError(f"sweep of {code.sweep_time:g} s is not an integer number of samples at {rate:g} Hz")
    return int(round(n))


def _chip_index(code: PhaseCode, rate: float) -> np.ndarray:
    n = samples_per_sweep(code, rate)
    per_chip = code.chip_duration * rate
    idx = np.floor(np.arange(n) / per_chip + 1e-9).astype(np.int64)
    return np.minimum(idx, code.n_chips - 1)


def bpsk_phase(code: PhaseCode, rate: float) -> np.ndarray:
    """Piecewise-constant phase ``pi * bit`` on the sample grid."""
    if code.chip_duration * rate < 2 - 1e-9:
        raise ValueError(
            f"rate {rate:g} Hz gives fewer than two samples per chip (T_c = {code.chip_duration:g} s)"
        )
    return code.phases[_chip_index(code, rate)]


def gaussian_kernel(eta: float, rate: float) -> np.ndarray:
    """Sampled ``exp(-eta^2 t^2)`` over ``|t| <= 5/eta``, normalised to unit sum."""
    half = int(np.floor(KERNEL_SPAN * rate / eta + 1e-9))
    t = np.arange(-half, half + 1) / rate
    w = np.exp(-((eta * t) ** 2))
    return w / w.sum()


def gaussian_phase(code: PhaseCode, rate: float) -> np.ndarray:
    """BPSK phase smoothed by the unit-area Gaussian of 3-dB bandwidth ``B_s``.

    Same-length convolution; the first and last chip phases are replicated
    beyond the record edges.
    """
    phi = bpsk_phase(code, rate)
    w = gaussian_kernel(code.eta, rate)
    if w.size > phi.size:
        raise ValueError(f"Gaussian kernel ({w.size} taps) is longer than the signal ({phi.size})")
    half = w.size // 2
    if half == 0:
        return phi.copy()
    padded = np.pad(phi, half, mode="edge")
    return oaconvolve(padded, w, mode="valid")


def gmsk_phase(code: PhaseCode, rate: float) -> np.ndarray:
    """Running trapezoidal integral of the Gaussian phase, times ``modulation_scale``."""
    phi_g = gaussian_phase(code, rate)
    return code.modulation_scale * cumulative_trapezoid(phi_g, dx=1.0 / rate, initial=0.0)


def code_phase(code: PhaseCode, rate: float) -> np.ndarray:
    if code.phase_type is PhaseType.BPSK:
        return bpsk_phase(code, rate)
    if code.phase_type is PhaseType.GAUSSIAN:
        return gaussian_phase(code, rate)
    return gmsk_phase(code, rate)


def coded_envelope(code: PhaseCode, rate: float) -> CodedEnvelope:
    """``s(t) = exp(j phi(t))`` for the code's phase type (constant modulus)."""
    return CodedEnvelope(ComplexBaseband(np.exp(1j * code_phase(code, rate)), rate), False)


def lag_compensation_response(k: float) -> TransferFunction:
    """``exp(-j pi f^2 / k)``, the inverse of the receiver's group-delay filter."""
    return TransferFunction(lambda f: np.exp(-1j * np.pi * f**2 / k), f"lag({k:g})")


def compensate_phase_lag(env: CodedEnvelope, k: float) -> CodedEnvelope:
    """Pre-distort the code spectrum so the group-delay filter cancels it."""
    if env.compensated:
        raise ValueError("envelope is already phase-lag compensated")
    return CodedEnvelope(apply_transfer(env.signal, lag_compensation_response(k)), True)


def gaussian_envelope_spectrum(code: PhaseCode, rate: float) -> ComplexBaseband:
    """BPSK envelope ``c(t)`` convolved with the Gaussian (spectral-analysis helper).

    This is the complex-envelope smoothing ``C(f) H(f)``; it is not constant
    modulus and is never transmitted.
    """
    c = ComplexBaseband(np.exp(1j * bpsk_phase(code, rate)), rate)
    bs = code.smoother_bandwidth
    h = TransferFunction(lambda f: np.exp(-np.log(2) / 2 * (f / bs) ** 2), f"gauss({bs:g})")
    return apply_transfer(c, h)
