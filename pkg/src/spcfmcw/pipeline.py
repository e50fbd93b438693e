"""End-to-end orchestration: single runs, parameter sweeps, matched-filter comparison.

Products are CSV files written with fixed number formatting, so two runs of
the same configuration and seed produce byte-identical CSVs.  Only
``manifest.json`` carries a timestamp.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .channel import SPEED_OF_LIGHT, add_awgn, add_interferer, propagate
from .metrics import (
    MetricReport,
    cross_isolation,
    papr,
    profile_psl,
    residual_phase_error,
    scenario_hash,
    spreading_factor,
    write_ledger,
)
from .receiver import (
    Chain,
    RangeProfile,
    decode_reference,
    dechirp,
    lowpass_and_sample,
    range_doppler,
    range_profile,
    receive,
    transmit,
    window_mainlobe_halfwidth,
)
from .scenario import ScenarioConfig, build_scenario
from .signal import ComplexBaseband, chebyshev_window, spectrogram, to_db, write_signal_csv

__all__ = [
    "StageError",
    "RunResult",
    "simulate",
    "generate",
    "run",
    "SWEEP_AXES",
    "sweep",
    "evaluate_point",
    "matched_filter_profile",
    "compare_matched_filter",
]

SWEEP_AXES = {
    "n_chips": "code.n_chips",
    "target_range_fraction": "target.0.range_fraction",
    "doppler_hz": "target.0.doppler",
    "phase_type": "code.type",
}
DEFAULT_TYPES = ("bpsk", "gaussian", "gmsk")
_FMT = "{:.12g}"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValueError, ArithmeticError, MemoryError) as e:
        raise StageError(name, e) from e


@dataclass
class Simulation:
    """In-memory results of one scenario.

    ``decoded`` holds every pulse; ``tx``, ``rx`` and ``beat`` only the first.
    """

    cfg: ScenarioConfig
    tx: List[ComplexBaseband]
    rx: List[ComplexBaseband]
    beat: List[ComplexBaseband]
    decoded: List[ComplexBaseband]
    chain: Chain

    @property
    def profile(self) -> RangeProfile:
        return range_profile(self.decoded[0], self.cfg.receiver, self.cfg.chirp.slope)


def simulate(cfg: ScenarioConfig, pulses: Optional[int] = None) -> Simulation:
    """Transmit, propagate and receive every pulse of the frame."""
    p, rc = cfg.chirp, cfg.receiver
    with _stage("coding"):
        code = cfg.phase_code()
    chain = cfg.chain if code is not None else Chain.FMCW
    n = cfg.frame.n_pulses if pulses is None else pulses
    pri = cfg.frame.pri(p)
    with _stage("interferer"):
        intf = cfg.interferer.build(p) if cfg.interferer is not None else None
    ref = None
    if chain is not Chain.FMCW:
        with _stage("decode-reference"):
            ref = decode_reference(code, p, rc, None if chain is Chain.PROPOSED else 0.0)
    txs, rxs, beats, decs = [], [], [], []
    for m in range(n):
        with _stage("waveform"):
            tx = transmit(p, code, chain, t0=m * pri)
        with _stage("channel"):
            rx = propagate(tx, cfg.targets, p)
            if intf is not None:
                rx = add_interferer(rx, intf, p)
            rx = add_awgn(rx, cfg.snr_db, seed=_noise_seed(cfg.seed, m))
        with _stage("receiver"):
            beat = lowpass_and_sample(dechirp(rx, p), rc)
            dec = receive(rx, p, rc, code, chain, ref)
        if m == 0:
            # raw records of later pulses are not kept (memory)
            txs.append(tx)
            rxs.append(rx)
            beats.append(beat)
        decs.append(dec)
    return Simulation(cfg, txs, rxs, beats, decs, chain)


def _noise_seed(seed: int, pulse: int) -> int:
    return int(np.random.SeedSequence([seed, pulse]).generate_state(1)[0])


def _metrics(sim: Simulation) -> List[MetricReport]:
    cfg = sim.cfg
    p, rc = cfg.chirp, cfg.receiver
    h = scenario_hash(cfg.resolved)
    prof = sim.profile
    out = [
        MetricReport("psl", profile_psl(prof, rc.window_sidelobe_db), "dB", h, cfg.seed),
        MetricReport("papr", papr(sim.tx[0]), "ratio", h, cfg.seed),
        MetricReport("peak_range", prof.peak_range, "m", h, cfg.seed),
    ]
    if sim.chain is not Chain.FMCW:
        out.append(MetricReport("spreading_factor", spreading_factor(cfg.code.n_chips), "dB", h, cfg.seed))
    if len(cfg.targets) == 1 and cfg.interferer is None:
        fb = p.slope * cfg.targets[0].delay
        eps = residual_phase_error(sim.decoded[0], fb)
        out.append(MetricReport("residual_phase_max", float(np.max(np.abs(eps))), "rad", h, cfg.seed))
    if cfg.interferer is not None and cfg.targets:
        k = p.slope
        fb1 = k * cfg.targets[0].delay
        fb2 = k * (cfg.interferer.delay + cfg.interferer.sync_offset)
        code = cfg.phase_code()
        if code is None:
            spread = 2 * rc.f_s / len(sim.decoded[0])
        elif code.phase_type.value == "bpsk":
            spread = code.chip_bandwidth
        else:
            spread = code.smoother_bandwidth
        W = window_mainlobe_halfwidth(len(sim.decoded[0]), rc.window_sidelobe_db)
        amp = abs(cfg.interferer.amplitude)
        if amp == 0:
            return out
        ci = cross_isolation(prof, fb1, fb2, spread, W, 20 * math.log10(amp))
        out += [
            MetricReport("cross_isolation", ci.isolation_db, "dB", h, cfg.seed),
            MetricReport("mean_suppression", ci.mean_suppression_db, "dB", h, cfg.seed),
        ]
    return out


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_FMT.format(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _write_matrix(path: Path, corner: str, cols: np.ndarray, rows: np.ndarray, data: np.ndarray) -> Path:
    """First row: ``corner`` then column axis; each later row: row axis then values."""
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner] + [_FMT.format(c) for c in cols])
        for r, vals in zip(rows, data):
            w.writerow([_FMT.format(r)] + [_FMT.format(v) for v in vals])
    return path


@dataclass
class RunResult:
    out_dir: Path
    products: List[Path] = field(default_factory=list)
    metrics: List[MetricReport] = field(default_factory=list)


def _spectrogram_params(n: int) -> Tuple[int, int]:
    win = int(2 ** max(4, round(math.log2(max(n // 32, 16)))))
    win = min(win, n)
    return win, max(1, win // 4)


def _write_manifest(cfg: ScenarioConfig, out: Path, derived: Dict[str, object], products: Sequence[Path]) -> Path:
    p, rc = cfg.chirp, cfg.receiver
    manifest = {
        "tool": "spcfmcw",
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": cfg.seed,
        "scenario_hash": scenario_hash(cfg.resolved),
        "parameters": cfg.resolved,
        "derived": {
            "slope_hz_per_s": p.slope,
            "tx_rate_hz": p.tx_rate,
            "max_delay_s": rc.max_delay(p.slope),
            "max_range_m": rc.max_range(p.slope),
            **derived,
        },
        "products": sorted(x.name for x in products),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def generate(cfg: ScenarioConfig, out_dir: Union[str, Path]) -> RunResult:
    """Dump the transmitted waveform of the first pulse and its code bits."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(out)
    p = cfg.chirp
    with _stage("coding"):
        code = cfg.phase_code()
    chain = Chain.FMCW if code is None else cfg.chain
    with _stage("waveform"):
        tx = transmit(p, code, chain)
    res.products.append(write_signal_csv(tx, out / "tx.csv"))
    if code is not None:
        res.products.append(_write_rows(out / "code.csv", ("chip", "bit"), enumerate(code.bits.tolist())))
    derived = {"chain": chain.value, "papr": papr(tx), "tx_samples_per_sweep": len(tx)}
    res.products.append(_write_manifest(cfg, out, derived, res.products))
    return res


def run(cfg: ScenarioConfig, out_dir: Union[str, Path], figures: Optional[bool] = None) -> RunResult:
    """Simulate a scenario and write the requested products into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(out)
    sim = simulate(cfg)
    p, rc = cfg.chirp, cfg.receiver
    want = set(cfg.outputs)
    draw = ("figures" in want) if figures is None else figures
    if draw:
        from . import plotting

    prof = sim.profile
    if "range_profile" in want:
        res.products.append(_write_rows(
            out / "range_profile.csv", ("range_m", "beat_hz", "magnitude_db"),
            zip(prof.range_axis, prof.frequencies, prof.magnitude_db),
        ))
        if draw:
            res.products.append(plotting.plot_range_profile(
                prof.range_axis, prof.magnitude_db, out / "range_profile.png", f"{sim.chain.value} chain",
            ))
    if "range_doppler" in want and len(sim.decoded) > 1:
        with _stage("range-doppler"):
            rd = range_doppler(sim.decoded, rc, p.slope, cfg.frame.pri(p), p.carrier_frequency)
        res.products.append(_write_matrix(
            out / "range_doppler.csv", "range_m\\velocity_mps", rd.velocity_axis, rd.range_axis, rd.magnitude_db,
        ))
        if draw:
            res.products.append(plotting.plot_range_doppler(
                rd.range_axis, rd.velocity_axis, rd.magnitude_db, out / "range_doppler.png", rc.window_sidelobe_db,
            ))
    if "spectrogram" in want:
        win, hop = _spectrogram_params(len(sim.beat[0]))
        sg = spectrogram(sim.beat[0], win, hop)
        res.products.append(_write_matrix(
            out / "spectrogram.csv", "frequency_hz\\time_s", sg.times, sg.frequencies, sg.magnitude_db,
        ))
        if draw:
            res.products.append(plotting.plot_spectrogram(sg.times, sg.frequencies, sg.magnitude_db, out / "spectrogram.png"))
    if "signals" in want:
        for name, sig in (("tx", sim.tx[0]), ("rx", sim.rx[0]), ("beat", sim.beat[0]), ("decoded", sim.decoded[0])):
            res.products.append(write_signal_csv(sig, out / f"{name}.csv"))
    with _stage("metrics"):
        res.metrics = _metrics(sim)
    if "metrics" in want:
        res.products.append(write_ledger(res.metrics, out / "metrics.csv"))

    derived = {
        "adc_samples_per_sweep": len(sim.decoded[0]),
        "targets": [{"range_m": t.range, "velocity_mps": t.velocity, "beat_hz": p.slope * t.delay}
                    for t in cfg.targets],
        "interferer_gain_relative_db": (
            cfg.resolved.get("interferer.amplitude_db", "0") if cfg.interferer is not None else None
        ),
        "chain": sim.chain.value,
    }
    res.products.append(_write_manifest(cfg, out, derived, res.products))
    return res


# --- sweeps -------------------------------------------------------------------


def evaluate_point(raw: Mapping[str, str]) -> Dict[str, float]:
    """Metrics of one single-pulse scenario given as raw config pairs."""
    cfg = build_scenario(dict(raw, **{"frame.n_pulses": "1"}))
    sim = simulate(cfg, pulses=1)
    p, rc = cfg.chirp, cfg.receiver
    prof = sim.profile
    row = {
        "psl_db": profile_psl(prof, rc.window_sidelobe_db),
        "papr": papr(sim.tx[0]),
        "peak_range_m": prof.peak_range,
    }
    fb = p.slope * cfg.targets[0].delay
    fd = cfg.targets[0].doppler(p.carrier_frequency)
    df = rc.f_s / len(sim.decoded[0])
    row["peak_shift_bins"] = (prof.frequencies[prof.mainlobe_bin] - fb) / df
    row["expected_shift_bins"] = fd / df
    eps = residual_phase_error(sim.decoded[0], fb + fd)
    row["residual_phase_max_rad"] = float(np.max(np.abs(eps)))
    return row


def _point_overrides(base: ScenarioConfig, axis: str, value, ptype: str, seed: int) -> Dict[str, str]:
    ov = {SWEEP_AXES[axis]: str(value), "code.type": ptype, "seed": str(seed), "code.seed": str(seed)}
    ov["chain"] = "fmcw" if ptype == "fmcw" else base.raw.get("chain", "proposed")
    return ov


def sweep(
    base: ScenarioConfig,
    axis: str,
    values: Sequence,
    types: Optional[Sequence[str]] = None,
    seeds: Sequence[int] = (0,),
    jobs: int = 1,
    out_dir: Optional[Union[str, Path]] = None,
    figures: bool = True,
) -> List[Dict[str, object]]:
    """One metrics row per (axis value, phase type, seed).

    Points run in a process pool when ``jobs > 1``; rows are collected and
    written by the calling process in a fixed order.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unsupported sweep axis {axis!r}; supported: {', '.join(SWEEP_AXES)}")
    types = ["-"] if axis == "phase_type" else list(types or DEFAULT_TYPES)
    jobs_list = []
    for v in values:
        for t in types:
            ptype = str(v) if axis == "phase_type" else t
            for sd in seeds:
                # building the point config validates it before any work starts
                point = base.with_overrides(_point_overrides(base, axis, v, ptype, sd))
                jobs_list.append(((v, ptype, sd), point.raw))
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate_point, [r for _, r in jobs_list]))
    else:
        results = [evaluate_point(r) for _, r in jobs_list]
    rows = []
    for (key, _), res in zip(jobs_list, results):
        v, t, s = key
        rows.append({"axis": axis, "value": v, "phase_type": t, "seed": s, **res})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = list(rows[0].keys())
        _write_rows(out / "sweep.csv", cols, ([r[c] for c in cols] for r in rows))
        if figures:
            from . import plotting

            plotting.plot_sweep(rows, axis, "psl_db", out / "sweep_psl.png")
            plotting.plot_sweep(rows, axis, "papr", out / "sweep_papr.png")
    return rows


# --- matched filter comparison -----------------------------------------------


def matched_filter_profile(rx: ComplexBaseband, tx: ComplexBaseband, bandwidth: float, sidelobe_db: float):
    """Circular cross-correlation of ``rx`` with ``tx`` at the transmit rate.

    A Chebyshev taper across the swept band ``[-B, 0]`` weights the spectrum.
    Returns ``(delay_s, magnitude)``.
    """
    if len(rx) != len(tx) or rx.sample_rate != tx.sample_rate:
        raise ValueError("rx and tx must share length and rate")
    n = len(rx)
    f = np.fft.fftfreq(n, 1 / rx.sample_rate)
    band = (f >= -bandwidth) & (f <= 0)
    taper = np.zeros(n)
    idx = np.nonzero(band)[0]
    order = idx[np.argsort(f[idx])]
    taper[order] = chebyshev_window(order.size, sidelobe_db)
    y = np.fft.ifft(np.fft.fft(rx.samples) * np.conj(np.fft.fft(tx.samples)) * taper)
    return np.arange(n) / rx.sample_rate, np.abs(y)


def compare_matched_filter(
    cfg: ScenarioConfig, out_dir: Optional[Union[str, Path]] = None, figures: bool = True
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Proposed chain vs full-band matched filter on the ranges ``[0, R_max]``.

    Returns ``(range_m, chain_db, matched_db)``, each normalized to its own
    peak; a zero-amplitude target yields both curves at the dB floor.
    """
    if len(cfg.targets) != 1:
        raise ValueError("matched-filter comparison needs exactly one target")
    sim = simulate(cfg, pulses=1)
    p, rc = cfg.chirp, cfg.receiver
    n = len(sim.decoded[0])
    X = np.fft.fftshift(np.fft.fft(sim.decoded[0].samples * chebyshev_window(n, rc.window_sidelobe_db)))
    f = np.fft.fftshift(np.fft.fftfreq(n, 1 / rc.f_s))
    keep = (f >= 0) & (f <= rc.f_b_max)
    r = SPEED_OF_LIGHT * f[keep] / (2 * p.slope)
    delay, mf = matched_filter_profile(sim.rx[0], sim.tx[0], p.bandwidth, rc.window_sidelobe_db)
    chain_db = to_db(np.abs(X[keep]))
    mf_db = to_db(np.interp(2 * r / SPEED_OF_LIGHT, delay, mf))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(out / "compare_mf.csv", ("range_m", "chain_db", "matched_db"), zip(r, chain_db, mf_db))
        if figures:
            from . import plotting

            plotting.plot_comparison(r, {"proposed chain": chain_db, "matched filter": mf_db}, out / "compare_mf.png")
    return r, chain_db, mf_db
