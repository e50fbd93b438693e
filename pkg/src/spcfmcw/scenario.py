"""Scenario configuration: a flat ``key = value`` grammar with dotted keys.

Grammar::

    # comment
    chirp.bandwidth = 50e6
    code.type = gmsk
    target.0.range_fraction = 0.2
    target.1.range = 300
    outputs = range_profile, metrics

Blank lines and ``#`` lines are ignored; a trailing ``# ...`` on a value line
is stripped.  Targets are ``target.<i>.<field>`` with consecutive indices from
0.  Every key is validated; errors name the key (:class:`ConfigError`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .channel import SPEED_OF_LIGHT, Interferer, Target
from .coding import CodedEnvelope, PhaseCode, PhaseType, coded_envelope, compensate_phase_lag, load_code, random_code
from .receiver import Chain, ReceiverConfig
from .waveform import ChirpParams, FrameParams

__all__ = [
    "ConfigError",
    "CodeSpec",
    "InterfererSpec",
    "TargetSpec",
    "ScenarioConfig",
    "PRESETS",
    "OUTPUTS",
    "parse_config_text",
    "load_scenario",
    "build_scenario",
    "default_tx_rate",
]

OUTPUTS = ("range_profile", "range_doppler", "spectrogram", "metrics", "signals", "figures")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


PRESETS: Dict[str, Dict[str, str]] = {
    # Shrunk version of the reference simulation: T/4, B/4, f_s/4.
    "desk": {
        "chirp.carrier_frequency": "3.315e9",
        "chirp.sweep_time": "0.25e-3",
        "chirp.bandwidth": "50e6",
        "receiver.f_cut": "10e6",
        "code.type": "gmsk",
        "code.n_chips": "64",
        "target.0.range_fraction": "0.2",
        "chain": "proposed",
    },
    "paper-sim": {
        "chirp.carrier_frequency": "3.315e9",
        "chirp.sweep_time": "1e-3",
        "chirp.bandwidth": "200e6",
        "receiver.f_cut": "40e6",
        "code.type": "gmsk",
        "code.n_chips": "1024",
        "target.0.range_fraction": "0.2",
        "chain": "proposed",
    },
    "table-1": {
        "chirp.carrier_frequency": "3.315e9",
        "chirp.sweep_time": "1e-3",
        "chirp.bandwidth": "40e6",
        "chirp.tx_rate": "400e6",
        "receiver.f_cut": "40e6",
        "receiver.window_sidelobe_db": "80",
        "code.type": "gmsk",
        "code.n_chips": "1024",
        "code.smoother_bandwidth": "2.048e6",
        "frame.n_pulses": "128",
        "target.0.range_fraction": "0.2",
        "chain": "proposed",
    },
}

_FLOAT_KEYS = {
    "chirp.carrier_frequency", "chirp.sweep_time", "chirp.bandwidth", "chirp.slope", "chirp.tx_rate",
    "code.smoother_ratio", "code.smoother_bandwidth", "code.modulation_scale",
    "receiver.f_cut", "receiver.f_s", "receiver.f_b_max", "receiver.window_sidelobe_db",
    "frame.pri", "noise.snr_db",
    "interferer.delay", "interferer.beat_fraction", "interferer.amplitude_db", "interferer.sync_offset",
    "interferer.smoother_ratio",
}
_INT_KEYS = {"code.n_chips", "code.seed", "frame.n_pulses", "seed", "interferer.n_chips", "interferer.seed"}
_TEXT_KEYS = {"code.type", "code.file", "chain", "outputs", "interferer.type"}
_TARGET_FIELDS = {"range", "range_fraction", "velocity", "doppler", "amplitude"}


@dataclass(frozen=True)
class CodeSpec:
    """How to obtain the victim code (``type = none`` means uncoded)."""

    phase_type: Optional[PhaseType]
    n_chips: int
    seed: int
    file: Optional[str] = None
    smoother_ratio: float = 2.0
    smoother_bandwidth: Optional[float] = None
    modulation_scale: Optional[float] = None

    def bits(self) -> np.ndarray:
        if self.file:
            return load_code(self.file)
        return random_code(self.n_chips, self.seed)

    def build(self, sweep_time: float) -> Optional[PhaseCode]:
        if self.phase_type is None:
            return None
        return PhaseCode.over_sweep(
            self.bits(), self.phase_type, sweep_time, self.smoother_ratio,
            self.smoother_bandwidth, self.modulation_scale,
        )


@dataclass(frozen=True)
class TargetSpec:
    range: Optional[float] = None
    range_fraction: Optional[float] = None
    velocity: Optional[float] = None
    doppler: Optional[float] = None
    amplitude: complex = 1.0

    def resolve(self, r_max: float, carrier_frequency: float) -> Target:
        r = self.range if self.range is not None else self.range_fraction * r_max
        if self.doppler is not None:
            v = self.doppler * SPEED_OF_LIGHT / (2 * carrier_frequency)
        else:
            v = self.velocity or 0.0
        return Target(r, v, self.amplitude)


@dataclass(frozen=True)
class InterfererSpec:
    """Synchronized second radar with its own random code (same sweep)."""

    phase_type: Optional[PhaseType]
    n_chips: int
    seed: int
    delay: float
    amplitude: complex = 1.0
    sync_offset: float = 0.0
    smoother_ratio: float = 2.0

    def build(self, p: ChirpParams) -> Interferer:
        if self.phase_type is None:
            env = CodedEnvelope(coded_envelope(PhaseCode.over_sweep([0], PhaseType.BPSK, p.sweep_time), p.tx_rate).signal)
        else:
            code = PhaseCode.over_sweep(random_code(self.n_chips, self.seed), self.phase_type, p.sweep_time, self.smoother_ratio)
            env = compensate_phase_lag(coded_envelope(code, p.tx_rate), p.slope)
        return Interferer(env, self.delay, self.amplitude, self.sync_offset)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    chirp: ChirpParams
    code: CodeSpec
    receiver: ReceiverConfig
    frame: FrameParams
    targets: Tuple[Target, ...]
    interferer: Optional[InterfererSpec]
    chain: Chain
    outputs: Tuple[str, ...]
    seed: int
    snr_db: float
    resolved: Dict[str, str] = field(default_factory=dict)
    raw: Dict[str, str] = field(default_factory=dict)

    def phase_code(self) -> Optional[PhaseCode]:
        return self.code.build(self.chirp.sweep_time)

    @property
    def max_range(self) -> float:
        return self.receiver.max_range(self.chirp.slope)

    def with_overrides(self, overrides: Mapping[str, str]) -> "ScenarioConfig":
        merged = dict(self.raw)
        _merge(merged, overrides)
        return build_scenario(merged)


def _strip_comment(value: str) -> str:
    i = value.find("#")
    return value[:i].strip() if i >= 0 else value.strip()


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Split config text into raw ``key -> value`` strings (last one wins)."""
    out: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {s!r}")
        key, _, value = s.partition("=")
        out[key.strip()] = _strip_comment(value)
    return out


def default_tx_rate(bandwidth: float, f_b_max: float, smoother_bandwidth: float, f_s: float, sweep_time: float) -> float:
    """``max(4B, 4 (f_b_max + B_s))`` rounded up to a multiple of ``f_s``.

    The multiple is also bumped until a sweep holds a whole number of samples.
    """
    need = max(4 * bandwidth, 4 * (f_b_max + smoother_bandwidth))
    q = max(1, math.ceil(need / f_s - 1e-9))
    for qq in range(q, q + 10_000):
        n = qq * f_s * sweep_time
        if abs(n - round(n)) < 1e-6:
            return qq * f_s
    raise ConfigError("chirp.tx_rate", "no integer multiple of f_s gives a whole number of samples per sweep")


def _num(raw: Mapping[str, str], key: str, kind=float, default=None):
    if key not in raw:
        return default
    text = raw[key]
    try:
        if kind is int:
            val = float(text)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if kind is complex:
            return complex(text.replace(" ", ""))
        return float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None


def _phase_type(raw, key) -> Optional[PhaseType]:
    value = raw.get(key, "bpsk").strip().lower()
    if value in ("none", "fmcw", "uncoded"):
        return None
    try:
        return PhaseType.parse(value)
    except ValueError as e:
        raise ConfigError(key, str(e)) from None


def _require(raw, key):
    if key not in raw:
        raise ConfigError(key, "required key is missing")


def build_scenario(raw: Mapping[str, str]) -> ScenarioConfig:
    """Validate raw key/value pairs and fill every default."""
    raw = dict(raw)
    targets_raw: Dict[int, Dict[str, str]] = {}
    for key in raw:
        if key.startswith("target."):
            parts = key.split(".")
            if len(parts) != 3 or not parts[1].isdigit() or parts[2] not in _TARGET_FIELDS:
                raise ConfigError(key, f"expected target.<index>.<{'|'.join(sorted(_TARGET_FIELDS))}>")
            targets_raw.setdefault(int(parts[1]), {})[parts[2]] = key
        elif key not in _FLOAT_KEYS | _INT_KEYS | _TEXT_KEYS:
            raise ConfigError(key, "unknown key")

    for key in ("chirp.carrier_frequency", "chirp.sweep_time", "chirp.bandwidth", "receiver.f_cut"):
        _require(raw, key)
    fc = _num(raw, "chirp.carrier_frequency")
    T = _num(raw, "chirp.sweep_time")
    B = _num(raw, "chirp.bandwidth")
    for key, val in (("chirp.carrier_frequency", fc), ("chirp.sweep_time", T), ("chirp.bandwidth", B)):
        if not val > 0:
            raise ConfigError(key, "must be positive")
    slope = _num(raw, "chirp.slope")
    if slope is not None and not math.isclose(slope, B / T, rel_tol=1e-9):
        raise ConfigError("chirp.slope", f"{slope:g} Hz/s disagrees with bandwidth/sweep_time = {B / T:g}")

    seed = _num(raw, "seed", int, 0)
    chain_text = raw.get("chain", "proposed")
    try:
        chain = Chain.parse(chain_text)
    except ValueError as e:
        raise ConfigError("chain", str(e)) from None

    ptype = _phase_type(raw, "code.type")
    if chain is Chain.FMCW:
        ptype = None
    n_chips = _num(raw, "code.n_chips", int, 64)
    code_file = raw.get("code.file") or None
    if code_file:
        try:
            n_chips = int(load_code(code_file).size)
        except (OSError, ValueError) as e:
            raise ConfigError("code.file", str(e)) from None
    if n_chips < 1:
        raise ConfigError("code.n_chips", "must be at least 1")
    ratio = _num(raw, "code.smoother_ratio", float, 2.0)
    bs = _num(raw, "code.smoother_bandwidth")
    if ratio <= 0:
        raise ConfigError("code.smoother_ratio", "must be positive")
    if bs is not None and bs <= 0:
        raise ConfigError("code.smoother_bandwidth", "must be positive")
    code = CodeSpec(
        ptype, n_chips, _num(raw, "code.seed", int, seed), code_file, ratio, bs,
        _num(raw, "code.modulation_scale"),
    )
    bs_eff = bs if bs is not None else ratio * n_chips / T

    try:
        rc = ReceiverConfig(
            _num(raw, "receiver.f_cut"),
            _num(raw, "receiver.f_s"),
            _num(raw, "receiver.f_b_max"),
            _num(raw, "receiver.window_sidelobe_db", float, 100.0),
        )
    except ValueError as e:
        raise ConfigError("receiver", str(e)) from None
    if not math.isclose(rc.f_s * T, round(rc.f_s * T), abs_tol=1e-6):
        raise ConfigError("receiver.f_s", f"f_s * T = {rc.f_s * T:g} is not a whole number of samples")

    tx_rate = _num(raw, "chirp.tx_rate")
    if tx_rate is None:
        tx_rate = default_tx_rate(B, rc.f_b_max, bs_eff, rc.f_s, T)
    try:
        p = ChirpParams(fc, T, B, tx_rate)
        rc.decimation(tx_rate)
    except ValueError as e:
        raise ConfigError("chirp.tx_rate", str(e)) from None
    if rc.f_cut > tx_rate:
        raise ConfigError("receiver.f_cut", "exceeds the transmit simulation rate")

    n_pulses = _num(raw, "frame.n_pulses", int, 1)
    try:
        fp = FrameParams(n_pulses, _num(raw, "frame.pri"))
    except ValueError as e:
        raise ConfigError("frame.n_pulses", str(e)) from None
    if fp.pulse_repetition_interval is not None and fp.pulse_repetition_interval < T:
        raise ConfigError("frame.pri", "must not be shorter than the sweep")

    if not targets_raw:
        raise ConfigError("target", "at least one target.<i>.range or target.<i>.range_fraction is required")
    if sorted(targets_raw) != list(range(len(targets_raw))):
        raise ConfigError("target", f"target indices must run 0..{len(targets_raw) - 1}")
    r_max = rc.max_range(p.slope)
    targets = []
    for i in sorted(targets_raw):
        keys = targets_raw[i]
        has_r, has_f = "range" in keys, "range_fraction" in keys
        if has_r == has_f:
            raise ConfigError(f"target.{i}", "give exactly one of range or range_fraction")
        if "velocity" in keys and "doppler" in keys:
            raise ConfigError(f"target.{i}", "give at most one of velocity or doppler")
        spec = TargetSpec(
            _num(raw, keys.get("range", ""), float) if has_r else None,
            _num(raw, keys.get("range_fraction", ""), float) if has_f else None,
            _num(raw, keys["velocity"]) if "velocity" in keys else None,
            _num(raw, keys["doppler"]) if "doppler" in keys else None,
            _num(raw, keys["amplitude"], complex) if "amplitude" in keys else 1.0,
        )
        try:
            tgt = spec.resolve(r_max, fc)
        except ValueError as e:
            raise ConfigError(f"target.{i}", str(e)) from None
        if tgt.delay >= T:
            raise ConfigError(f"target.{i}", f"round-trip delay {tgt.delay:g} s exceeds the sweep")
        if tgt.range > r_max * (1 + 1e-9):
            raise ConfigError(f"target.{i}", f"range {tgt.range:g} m exceeds R_max = {r_max:g} m")
        targets.append(tgt)

    interferer = None
    if any(k.startswith("interferer.") for k in raw):
        has_delay, has_frac = "interferer.delay" in raw, "interferer.beat_fraction" in raw
        if has_delay == has_frac:
            raise ConfigError("interferer", "give exactly one of interferer.delay or interferer.beat_fraction")
        delay = _num(raw, "interferer.delay") if has_delay else _num(raw, "interferer.beat_fraction") * rc.f_b_max / p.slope
        if not 0 <= delay < T:
            raise ConfigError("interferer.delay", "must lie in [0, sweep_time)")
        gain = 10 ** (_num(raw, "interferer.amplitude_db", float, 0.0) / 20)
        itype = _phase_type(raw, "interferer.type") if "interferer.type" in raw else ptype
        interferer = InterfererSpec(
            itype,
            _num(raw, "interferer.n_chips", int, n_chips),
            _num(raw, "interferer.seed", int, seed + 1_000_003),
            delay,
            gain,
            _num(raw, "interferer.sync_offset", float, 0.0),
            _num(raw, "interferer.smoother_ratio", float, ratio),
        )

    outputs_text = raw.get("outputs", "range_profile, range_doppler, spectrogram, metrics, figures")
    outputs = tuple(o.strip() for o in outputs_text.split(",") if o.strip())
    bad = [o for o in outputs if o not in OUTPUTS]
    if bad:
        raise ConfigError("outputs", f"unknown product(s) {bad}; choose from {', '.join(OUTPUTS)}")

    snr = _num(raw, "noise.snr_db", float, math.inf)
    if math.isnan(snr) or snr == -math.inf:
        raise ConfigError("noise.snr_db", "must be finite or inf")

    resolved = dict(raw)
    resolved.update({
        "chirp.slope": repr(p.slope),
        "chirp.tx_rate": repr(p.tx_rate),
        "receiver.f_s": repr(rc.f_s),
        "receiver.f_b_max": repr(rc.f_b_max),
        "receiver.window_sidelobe_db": repr(rc.window_sidelobe_db),
        "code.n_chips": str(n_chips),
        "code.seed": str(code.seed),
        "code.smoother_ratio": repr(ratio),
        "frame.n_pulses": str(n_pulses),
        "chain": chain.value,
        "seed": str(seed),
        "outputs": ", ".join(outputs),
    })
    if ptype is None and chain is not Chain.FMCW:
        resolved["code.type"] = "none"
    resolved = dict(sorted(resolved.items()))
    return ScenarioConfig(p, code, rc, fp, tuple(targets), interferer, chain, outputs, seed, snr, resolved, dict(raw))


def _merge(raw: Dict[str, str], new: Mapping[str, str]) -> None:
    # setting either range form of a target replaces the other one
    for key in new:
        if key.startswith("target.") and key.endswith((".range", ".range_fraction")):
            idx = key.rsplit(".", 1)[0]
            raw.pop(idx + ".range", None)
            raw.pop(idx + ".range_fraction", None)
    raw.update({k: str(v) for k, v in new.items()})


def load_scenario(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> ScenarioConfig:
    """Preset, then config file, then explicit overrides (later wins)."""
    raw: Dict[str, str] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
        _merge(raw, PRESETS[preset])
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(str(path), f"cannot read config ({e.strerror})") from None
        _merge(raw, parse_config_text(text, str(path)))
    if overrides:
        _merge(raw, overrides)
    if not raw:
        raise ConfigError("config", "no preset or config file given")
    return build_scenario(raw)
