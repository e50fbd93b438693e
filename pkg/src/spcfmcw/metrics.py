"""Waveform and profile metrics: PSL, PAPR, spreading factor, cross-isolation,
spectral nulls and residual phase error, plus a CSV results ledger.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import uniform_filter1d

from .receiver import RangeProfile, window_mainlobe_halfwidth
from .signal import ComplexBaseband, bin_frequencies

__all__ = [
    "psl",
    "profile_psl",
    "papr",
    "spreading_factor",
    "CrossIsolation",
    "cross_isolation",
    "BeatSpectrum",
    "beat_spectrum",
    "first_null",
    "band_power_db",
    "residual_phase_error",
    "MetricReport",
    "scenario_hash",
    "write_ledger",
    "LEDGER_HEADER",
]


def _outside_mainlobe(n: int, peak: int, halfwidth: int) -> np.ndarray:
    d = (np.arange(n) - peak) % n
    return (d > halfwidth) & (d < n - halfwidth)


def psl(profile: RangeProfile, mainlobe_halfwidth_bins: int) -> float:
    """Highest level outside ``peak +- halfwidth`` bins, in dB relative to the peak.

    The exclusion zone wraps around the (circular) profile ends.
    """
    mag = profile.magnitude_db
    peak = int(np.argmax(mag))
    mask = _outside_mainlobe(mag.size, peak, int(mainlobe_halfwidth_bins))
    if not mask.any():
        raise ValueError(f"a {mainlobe_halfwidth_bins}-bin exclusion covers the whole {mag.size}-bin profile")
    return float(mag[mask].max() - mag[peak])


def profile_psl(profile: RangeProfile, sidelobe_db: float) -> float:
    """PSL with the exclusion taken from the Chebyshev window's own mainlobe."""
    return psl(profile, window_mainlobe_halfwidth(profile.magnitude_db.size, sidelobe_db))


def papr(sig: Union[ComplexBaseband, np.ndarray]) -> float:
    """``max|x|^2 / mean|x|^2``."""
    x = sig.samples if isinstance(sig, ComplexBaseband) else np.asarray(sig)
    p = np.abs(x) ** 2
    mean = p.mean()
    if mean == 0:
        raise ValueError("PAPR of an all-zero signal is undefined")
    return float(p.max() / mean)


def spreading_factor(n_chips: int) -> float:
    """``10 log10(N_c)`` dB."""
    if n_chips < 1:
        raise ValueError("n_chips must be at least 1")
    return float(10 * np.log10(n_chips))


@dataclass(frozen=True, eq=False)
class CrossIsolation:
    """Interference measures on one peak-normalized profile (dB).

    Attributes:
        isolation_db: victim peak minus the largest interferer residual in
            the spread region.
        mean_suppression_db: interferer peak level without spreading (equal to
            the victim peak when amplitudes match) minus the mean residual
            power density inside ``f_b2 +- spread_halfwidth``.
        inside_db / outside_db: residual power integrated inside and outside
            the spread band, relative to the victim peak power.
        residual_db: the profile with the victim mainlobe masked (NaN).
    """

    isolation_db: float
    mean_suppression_db: float
    inside_db: float
    outside_db: float
    residual_db: np.ndarray


def cross_isolation(
    profile: RangeProfile,
    victim_frequency: float,
    interferer_frequency: float,
    spread_halfwidth: float,
    mainlobe_halfwidth_bins: int,
    interferer_gain_db: float = 0.0,
) -> CrossIsolation:
    """Fast-time cross-isolation on a beat-frequency axis.

    Args:
        profile: decoded profile containing victim and interferer.
        victim_frequency: expected victim beat frequency (Hz).
        interferer_frequency: nominal interferer beat frequency ``k tau_2``.
        spread_halfwidth: half-width of the band the residual is expected to
            occupy (Hz).
        mainlobe_halfwidth_bins: victim mainlobe exclusion.
        interferer_gain_db: interferer amplitude relative to the victim.
    """
    f = profile.frequencies
    df = f[1] - f[0]
    mag = profile.magnitude_db
    vb = int(np.argmin(np.abs(f - victim_frequency)))
    lo, hi = max(vb - 1, 0), min(vb + 2, mag.size)
    local = lo + int(np.argmax(mag[lo:hi]))
    if abs(local - vb) > 1 or mag[local] < mag.max() - 1e-9:
        raise ValueError(
            f"victim peak not found within one bin of {victim_frequency:g} Hz "
            f"(strongest bin at {f[int(np.argmax(mag))]:g} Hz)"
        )
    victim_level = mag[local]
    keep = _outside_mainlobe(mag.size, local, mainlobe_halfwidth_bins)
    residual = np.where(keep, mag, np.nan)
    inside = keep & (np.abs(f - interferer_frequency) <= spread_halfwidth + 1e-9 * abs(df))
    outside = keep & ~(np.abs(f - interferer_frequency) <= spread_halfwidth + 1e-9 * abs(df))
    if not inside.any():
        raise ValueError("interferer spread band lies entirely inside the victim mainlobe")
    p = 10 ** ((mag - victim_level) / 10)
    inside_p = p[inside].sum()
    outside_p = p[outside].sum() if outside.any() else 0.0
    with np.errstate(divide="ignore"):
        return CrossIsolation(
            isolation_db=float(victim_level - mag[inside].max()),
            mean_suppression_db=float(interferer_gain_db - 10 * np.log10(p[inside].mean())),
            inside_db=float(10 * np.log10(inside_p)),
            outside_db=float(10 * np.log10(outside_p)),
            residual_db=residual,
        )


@dataclass(frozen=True, eq=False)
class BeatSpectrum:
    power_db: np.ndarray  # peak-normalized
    frequencies: np.ndarray
    resolution: float  # Hz per bin


def beat_spectrum(
    beat: Union[ComplexBaseband, Sequence[ComplexBaseband]],
    segment_len: Optional[int] = None,
    nfft: Optional[int] = None,
    offset: int = 0,
) -> BeatSpectrum:
    """Averaged periodogram over consecutive, non-overlapping, unwindowed segments.

    With ``segment_len`` equal to a whole number of chips every segment shares
    the chip pulse's spectral zeros, so the average shows the code's nulls
    instead of one random realization's ragged minima.  Segments start at
    ``offset`` (circularly), so a delayed code can be chip-aligned.  Several
    records (e.g. independent codes) are averaged together.  Defaults: one
    segment covering the record, ``nfft = segment_len``.
    """
    beats = [beat] if isinstance(beat, ComplexBaseband) else list(beat)
    if not beats:
        raise ValueError("no records to analyse")
    rate = beats[0].sample_rate
    n = len(beats[0])
    if any(len(b) != n or b.sample_rate != rate for b in beats):
        raise ValueError("records must share length and sample rate")
    L = n if segment_len is None else int(segment_len)
    if L < 1 or L > n:
        raise ValueError(f"segment length {L} outside [1, {n}]")
    nfft = L if nfft is None else int(nfft)
    if nfft < L:
        raise ValueError("nfft must be at least the segment length")
    m = n // L
    P = np.zeros(nfft)
    for b in beats:
        x = np.roll(b.samples, -int(offset))
        segs = x[: m * L].reshape(m, L)
        P += (np.abs(np.fft.fft(segs, n=nfft, axis=1)) ** 2).sum(axis=0)
    P = np.fft.fftshift(P)
    f = np.fft.fftshift(bin_frequencies(nfft, rate))
    peak = P.max()
    if peak == 0:
        raise ValueError("beat spectrum is identically zero")
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(np.maximum(P / peak, 1e-40))
    return BeatSpectrum(db, f, rate / nfft)


NUMERICAL_FLOOR_DB = -250.0


def first_null(spec: BeatSpectrum, f_b: float, smooth_bins: int = 3) -> float:
    """First local minimum of the (3-bin smoothed) dB spectrum above ``f_b``.

    A minimum is a bin, or a flat run of bins, lower than the bins on both
    sides of it.  Levels below ``NUMERICAL_FLOOR_DB`` count as exact zeros, so
    round-off ripple on an empty band is not mistaken for a null.  Raises if
    no minimum exists below the positive Nyquist edge.
    """
    p = np.maximum(spec.power_db, NUMERICAL_FLOOR_DB)
    if smooth_bins > 1:
        p = uniform_filter1d(p, smooth_bins, mode="nearest")
    f = spec.frequencies
    i = max(int(np.searchsorted(f, f_b, side="right")), 1)
    while i < p.size - 1:
        if p[i] < p[i - 1]:
            j = i
            while j + 1 < p.size and p[j + 1] == p[i]:
                j += 1
            if j + 1 < p.size and p[j + 1] > p[i]:
                return float(f[i])
            i = j + 1
        else:
            i += 1
    raise ValueError(f"no spectral minimum above {f_b:g} Hz before Nyquist")


def band_power_db(spec: BeatSpectrum, lo: float, hi: float) -> float:
    """Integrated power in ``lo <= f < hi`` relative to the total, in dB."""
    P = 10 ** (spec.power_db / 10)
    sel = (spec.frequencies >= lo) & (spec.frequencies < hi)
    with np.errstate(divide="ignore"):
        return float(10 * np.log10(P[sel].sum() / P.sum()))


def residual_phase_error(decoded: ComplexBaseband, f_b: float) -> np.ndarray:
    """``eps(t)``: phase of ``decoded * exp(-j 2 pi f_b t)``, mean removed.

    The phase is taken relative to the record's mean phasor, unwrapped, and
    its mean subtracted.
    """
    x = decoded.samples * np.exp(-2j * np.pi * f_b * decoded.local_time)
    ref = x.mean()
    if ref != 0:
        x = x * np.conj(ref) / abs(ref)
    ph = np.unwrap(np.angle(x))
    return ph - ph.mean()


# --- results ledger -----------------------------------------------------------

LEDGER_HEADER = ("name", "value", "unit", "scenario_hash", "seed")


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    unit: str
    scenario_hash: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"metric {self.name} is not finite ({self.value})")

    def row(self) -> Tuple[str, str, str, str, str]:
        seed = "" if self.seed is None else str(self.seed)
        return (self.name, f"{self.value:.12g}", self.unit, self.scenario_hash, seed)


def scenario_hash(params: dict) -> str:
    """Short SHA-256 of the canonical JSON form of ``params``."""
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_ledger(reports: Iterable[MetricReport], path: Union[str, Path], append: bool = False) -> Path:
    """Write (or append) metric rows to a CSV ledger with a header line."""
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(LEDGER_HEADER)
        for r in reports:
            w.writerow(r.row())
    return path
