"""Closed-form expressions used as independent checks on the sampled code paths.

* instantaneous frequency of the BPSK, Gaussian and GMSK phase types;
* the phase-lag compensated BPSK envelope written with the imaginary error
  function, together with a self-contained complex ``erfi``.

Chip transitions sit at ``t_n = n T_c`` (``n = 1 .. N_c-1``); the phase
before the first transition is the first chip's phase.
"""

from __future__ import annotations

from typing import NamedTuple, Union

import numpy as np
from scipy import special

from .coding import PhaseCode, PhaseType

__all__ = [
    "erfi",
    "ImpulseTrain",
    "analytic_gaussian_phase",
    "analytic_instantaneous_frequency",
    "lag_step_response",
    "analytic_compensated_bpsk",
]

_SQRT_PI = np.sqrt(np.pi)
_SERIES_RADIUS = 3.0
_SERIES_TERMS = 80
_CF_DEPTH = 400
# Continued fraction is used when |Im z| >= _CF_MIN_SLOPE * |z|.
_CF_MIN_SLOPE = 0.2


def _erfi_series(z: np.ndarray) -> np.ndarray:
    # 2/sqrt(pi) * sum z^(2n+1) / (n! (2n+1))
    z2 = z * z
    term = z.copy()
    total = z.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * z2 / n
        total = total + term / (2 * n + 1)
    return 2.0 / _SQRT_PI * total


def _faddeeva_cf(zeta: np.ndarray) -> np.ndarray:
    # Laplace continued fraction, valid for Im(zeta) > 0:
    # w = (i/sqrt(pi)) / (zeta - (1/2)/(zeta - (2/2)/(zeta - (3/2)/...)))
    r = np.zeros_like(zeta)
    for n in range(_CF_DEPTH, 0, -1):
        r = (0.5 * n) / (zeta - r)
    return 1j / _SQRT_PI / (zeta - r)


def erfi(z) -> Union[complex, np.ndarray]:
    """Imaginary error function ``erfi(z) = -j erf(jz)`` for complex ``z``.

    * ``|z| <= 3``: Maclaurin series, 80 terms.
    * ``|z| > 3`` with ``|Im z| >= 0.2 |z|``: ``erfi(z) = -j (1 - exp(z^2) w(-z))``
      after reflecting into ``Im z <= 0``, where the Faddeeva function ``w`` is
      evaluated with Laplace's continued fraction (400 levels, backward).
    * anything else (large, nearly real ``z``) is delegated to
      ``scipy.special.erfi``.

    The first two branches cover the rays ``arg z = +-pi/4`` met by chirp
    filters; there the relative error is below 1e-12.
    """
    scalar = np.isscalar(z)
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    out = np.empty_like(z)
    r = np.abs(z)

    small = r <= _SERIES_RADIUS
    if small.any():
        out[small] = _erfi_series(z[small])

    cf = ~small & (np.abs(z.imag) >= _CF_MIN_SLOPE * r)
    if cf.any():
        zz = z[cf]
        flip = zz.imag > 0
        zz = np.where(flip, -zz, zz)
        with np.errstate(over="ignore", invalid="ignore"):
            val = -1j * (1.0 - np.exp(zz * zz) * _faddeeva_cf(-zz))
        out[cf] = np.where(flip, -val, val)

    rest = ~small & ~cf
    if rest.any():
        out[rest] = special.erfi(z[rest])

    return complex(out[0]) if scalar else out


class ImpulseTrain(NamedTuple):
    """Dirac impulses: ``sum_i weights[i] * delta(t - locations[i])``."""

    locations: np.ndarray
    weights: np.ndarray


def _transitions(code: PhaseCode):
    phases = code.phases
    jumps = np.diff(phases)
    n = np.nonzero(jumps)[0] + 1
    return n * code.chip_duration, jumps[n - 1]


def _sum_over_transitions(t, times, jumps, fn, chunk=256):
    acc = np.zeros(t.shape, dtype=float)
    for i in range(0, times.size, chunk):
        tt, jj = times[i:i + chunk], jumps[i:i + chunk]
        acc += (jj[:, None] * fn(t[None, :] - tt[:, None])).sum(axis=0)
    return acc


def analytic_gaussian_phase(code: PhaseCode, t) -> np.ndarray:
    """``phi_1 + sum_n dphi_n (1 + erf(eta (t - n T_c))) / 2``."""
    t = np.asarray(t, dtype=float)
    times, jumps = _transitions(code)
    eta = code.eta
    steps = _sum_over_transitions(t, times, jumps, lambda x: 0.5 * (1 + special.erf(eta * x)))
    return code.phases[0] + steps


def analytic_instantaneous_frequency(code: PhaseCode, t) -> Union[np.ndarray, ImpulseTrain]:
    """Instantaneous frequency ``(1/2pi) dphi/dt`` in Hz.

    BPSK has a purely impulsive frequency, so an :class:`ImpulseTrain` (locations
    in s, weights in cycles) is returned instead of samples.  GAUSSIAN yields
    a Gaussian bump of peak ``eta dphi / (2 pi sqrt(pi))`` per transition.
    GMSK yields ``modulation_scale / (2 pi)`` times the smoothed phase, which is
    the erf sum plus the first-chip baseline.
    """
    times, jumps = _transitions(code)
    if code.phase_type is PhaseType.BPSK:
        return ImpulseTrain(times, jumps / (2 * np.pi))
    t = np.asarray(t, dtype=float)
    if code.phase_type is PhaseType.GAUSSIAN:
        eta = code.eta
        return eta / (2 * np.pi * _SQRT_PI) * _sum_over_transitions(
            t, times, jumps, lambda x: np.exp(-((eta * x) ** 2))
        )
    return code.modulation_scale / (2 * np.pi) * analytic_gaussian_phase(code, t)


def lag_step_response(k: float, t) -> np.ndarray:
    """Unit step filtered by ``exp(-j pi f^2 / k)``.

    ``1/2 + erf(beta t)/2`` with ``beta = sqrt(pi k / j)``, rewritten through
    ``erf(w) = -j erfi(j w)`` as ``1/2 - (j/2) erfi(sqrt(j pi k) t)``.
    """
    t = np.asarray(t, dtype=float)
    gamma = np.sqrt(1j * np.pi * k)
    return 0.5 - 0.5j * erfi(gamma * t)


def analytic_compensated_bpsk(code: PhaseCode, k: float, t, guarded: bool = False) -> np.ndarray:
    """Phase-lag compensated BPSK envelope (linear, not circular, convolution).

    The code amplitude ``a_n = exp(j phi_n)`` is written as a sum of unit
    steps and each step is replaced by :func:`lag_step_response`.  With
    ``guarded`` the code is zero outside ``[0, T)`` (steps at 0 and T);
    otherwise the first and last chips extend to infinity.
    """
    if code.phase_type is not PhaseType.BPSK:
        raise ValueError("closed form exists only for BPSK codes")
    t = np.asarray(t, dtype=float)
    a = np.exp(1j * code.phases)
    tc = code.chip_duration
    if guarded:
        a = np.concatenate(([0.0], a, [0.0]))
        edges = np.arange(code.n_chips + 1) * tc
        baseline = 0.0
    else:
        edges = np.arange(1, code.n_chips) * tc
        baseline = a[0]
    deltas = np.diff(a)
    keep = deltas != 0
    out = np.full(t.shape, baseline, dtype=np.complex128)
    for edge, d in zip(edges[keep], deltas[keep]):
        out += d * lag_step_response(k, t - edge)
    return out
