"""Complex baseband container and frequency-domain signal machinery.

Every filter in the package (low-pass, group delay, phase-lag compensation,
fractional delay) is applied by multiplying the DFT of one full record, so
all of them share circular (periodic) convolution semantics.  Guard
intervals, where needed, are the caller's business.

Frequency convention: bin ``m`` of an ``N``-point record sampled at ``fs``
sits at ``m*fs/N`` for ``m < N/2`` and ``(m-N)*fs/N`` otherwise, i.e.
``numpy.fft.fftfreq``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.signal import windows

__all__ = [
    "ComplexBaseband",
    "TransferFunction",
    "Spectrogram",
    "bin_frequencies",
    "spectrum",
    "inverse_spectrum",
    "apply_transfer",
    "delay_response",
    "fractional_delay",
    "decimate",
    "chebyshev_window",
    "spectrogram",
    "to_db",
    "write_signal_csv",
    "read_signal_csv",
]

# dB floor relative to the peak; keeps exact zeros finite in dB products.
DB_FLOOR = -400.0


@dataclass(frozen=True, eq=False)
class ComplexBaseband:
    """Uniformly sampled complex signal.

    Args:
        samples: complex samples (copied to a read-only complex128 array).
        sample_rate: sampling rate in Hz.
        t0: time of the first sample in seconds.
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if x.size == 0:
            raise ValueError("ComplexBaseband needs at least one sample")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def time(self) -> np.ndarray:
        """Absolute sample times in seconds."""
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    @property
    def local_time(self) -> np.ndarray:
        """Sample times relative to the first sample."""
        return np.arange(self.samples.size) / self.sample_rate

    @property
    def energy(self) -> float:
        return float(np.vdot(self.samples, self.samples).real)

    def replace(self, samples: np.ndarray) -> "ComplexBaseband":
        """Same rate and start time, new samples."""
        return ComplexBaseband(samples, self.sample_rate, self.t0)

    def __add__(self, other: "ComplexBaseband") -> "ComplexBaseband":
        _check_compatible(self, other)
        return self.replace(self.samples + other.samples)

    def scaled(self, gain: complex) -> "ComplexBaseband":
        return self.replace(self.samples * gain)


def _check_compatible(a: ComplexBaseband, b: ComplexBaseband) -> None:
    if len(a) != len(b) or a.sample_rate != b.sample_rate:
        raise ValueError(
            f"incompatible signals: {len(a)} samples @ {a.sample_rate} Hz "
            f"vs {len(b)} samples @ {b.sample_rate} Hz"
        )


@dataclass(frozen=True)
class TransferFunction:
    """Frequency response ``H(f)``; ``evaluator`` maps Hz to complex gain."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(f, dtype=float)), dtype=np.complex128)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        a, b = self.evaluator, other.evaluator
        return TransferFunction(lambda f: a(f) * b(f), f"{self.description}*{other.description}")


def bin_frequencies(n: int, sample_rate: float) -> np.ndarray:
    """DFT bin frequencies in natural (unshifted) order."""
    return np.fft.fftfreq(n, 1.0 / sample_rate)


def spectrum(sig: ComplexBaseband) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal spectrum on a centred axis.

    Returns ``(X, f)`` with ``f`` ascending over ``[-fs/2, fs/2)``.  The
    transform is unitary, so Parseval holds without extra factors.
    """
    n = len(sig)
    X = np.fft.fftshift(np.fft.fft(sig.samples, norm="ortho"))
    f = np.fft.fftshift(bin_frequencies(n, sig.sample_rate))
    return X, f


def inverse_spectrum(X: np.ndarray, sample_rate: float, t0: float = 0.0) -> ComplexBaseband:
    """Inverse of :func:`spectrum`."""
    x = np.fft.ifft(np.fft.ifftshift(np.asarray(X)), norm="ortho")
    return ComplexBaseband(x, sample_rate, t0)


def apply_transfer(sig: ComplexBaseband, h: TransferFunction) -> ComplexBaseband:
    """Multiply the record's DFT by ``h`` (circular convolution)."""
    f = bin_frequencies(len(sig), sig.sample_rate)
    H = h(f)
    if H.shape != f.shape:
        H = np.broadcast_to(H, f.shape)
    bad = ~np.isfinite(H)
    if bad.any():
        raise ValueError(
            f"transfer function {h.description or '<anonymous>'} is not finite "
            f"at f = {f[bad][0]!r} Hz"
        )
    return sig.replace(np.fft.ifft(np.fft.fft(sig.samples) * H))


def delay_response(tau: float) -> TransferFunction:
    """Pure delay ``exp(-j 2 pi f tau)``."""
    return TransferFunction(lambda f: np.exp(-2j * np.pi * f * tau), f"delay({tau:g})")


def fractional_delay(sig: ComplexBaseband, tau: float) -> ComplexBaseband:
    """Delay by ``tau`` seconds through the DFT (exact for on-grid delays)."""
    if abs(tau) >= sig.duration:
        raise ValueError(
            f"delay {tau:g} s is not shorter than the record ({sig.duration:g} s)"
        )
    if tau == 0:
        return sig
    shift = tau * sig.sample_rate
    if np.isclose(shift, np.round(shift), rtol=0, atol=1e-9):
        return sig.replace(np.roll(sig.samples, int(np.round(shift))))
    return apply_transfer(sig, delay_response(tau))


def decimate(sig: ComplexBaseband, factor: int) -> ComplexBaseband:
    """Keep every ``factor``-th sample.

    Anti-alias filtering is the caller's job.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError(f"decimation factor must be a positive integer, got {factor}")
    factor = int(factor)
    if len(sig) % factor:
        raise ValueError(f"record length {len(sig)} is not divisible by {factor}")
    return ComplexBaseband(sig.samples[::factor], sig.sample_rate / factor, sig.t0)


def chebyshev_window(n: int, sidelobe_db: float) -> np.ndarray:
    """Symmetric Dolph-Chebyshev taper with its peak at 1."""
    if n < 2:
        raise ValueError("window length must be at least 2")
    if not sidelobe_db > 0:
        raise ValueError("sidelobe level must be positive dB")
    w = windows.chebwin(n, at=sidelobe_db, sym=True)
    w = w / w.max()
    # enforce exact mirror symmetry
    return 0.5 * (w + w[::-1])


def to_db(x: np.ndarray, normalize: bool = True) -> np.ndarray:
    """``20 log10 |x|``, optionally peak-normalised, floored at ``DB_FLOOR``."""
    mag = np.abs(np.asarray(x))
    ref = mag.max() if normalize else 1.0
    if ref == 0:
        return np.full(mag.shape, DB_FLOOR)
    floor = ref * 10 ** (DB_FLOOR / 20)
    return 20 * np.log10(np.maximum(mag, floor) / ref)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    magnitude_db: np.ndarray  # (frequency, time)
    times: np.ndarray
    frequencies: np.ndarray


def spectrogram(
    sig: ComplexBaseband,
    window_len: int,
    hop: int,
    window: Union[str, np.ndarray] = "hann",
    nfft: Optional[int] = None,
) -> Spectrogram:
    """Short-time Fourier magnitude in dB, peak-normalised to 0 dB.

    Frames start every ``hop`` samples; a frame's time stamp is its centre.
    """
    if hop <= 0:
        raise ValueError(f"hop must be positive, got {hop}")
    if window_len > len(sig) or window_len < 1:
        raise ValueError(f"window length {window_len} exceeds record length {len(sig)}")
    w = windows.get_window(window, window_len) if isinstance(window, str) else np.asarray(window)
    nfft = nfft or window_len
    frames = np.lib.stride_tricks.sliding_window_view(sig.samples, window_len)[::hop]
    S = np.fft.fftshift(np.fft.fft(frames * w, n=nfft, axis=1), axes=1).T
    starts = np.arange(frames.shape[0]) * hop
    times = sig.t0 + (starts + window_len / 2) / sig.sample_rate
    freqs = np.fft.fftshift(bin_frequencies(nfft, sig.sample_rate))
    return Spectrogram(to_db(S), times, freqs)


# --- CSV signal format --------------------------------------------------------
#
# <name>.csv       header "t,re,im", one row per sample
# <name>.csv.meta  "sample_rate=<Hz>" and "t0=<s>" lines


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta")


def write_signal_csv(sig: ComplexBaseband, path: Union[str, Path]) -> Path:
    path = Path(path)
    t = sig.time
    with path.open("w", newline="\n") as fh:
        fh.write("t,re,im\n")
        for ti, xi in zip(t, sig.samples):
            fh.write(f"{ti:.17g},{xi.real:.17g},{xi.imag:.17g}\n")
    _meta_path(path).write_text(f"sample_rate={sig.sample_rate:.17g}\nt0={sig.t0:.17g}\n")
    return path


def read_signal_csv(path: Union[str, Path]) -> ComplexBaseband:
    path = Path(path)
    meta = {}
    for line in _meta_path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = float(value)
    missing = {"sample_rate", "t0"} - meta.keys()
    if missing:
        raise ValueError(f"{_meta_path(path)}: missing keys {sorted(missing)}")
    with path.open() as fh:
        header = fh.readline().strip()
        if header != "t,re,im":
            raise ValueError(f"{path}: expected header 't,re,im', got {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return ComplexBaseband(data[:, 1] + 1j * data[:, 2], meta["sample_rate"], meta["t0"])
