"""Command-line entry point.

Subcommands::

    spcfmcw presets
    spcfmcw generate   --preset desk --out OUT
    spcfmcw run        --preset desk --out OUT [--set key=value ...]
    spcfmcw sweep      --preset desk --axis n_chips --values 16,64,256 --out OUT --jobs 4
    spcfmcw compare-mf --preset desk --out OUT

Exit codes: 0 success, 2 configuration error, 3 runtime or stage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Dict, List, Optional, Sequence

from . import __version__
from .pipeline import SWEEP_AXES, StageError, compare_matched_filter, generate, run, sweep
from .scenario import PRESETS, ConfigError, ScenarioConfig, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("spcfmcw")


def _parse_set(items: Sequence[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(item, "expected --set key=value")
        out[key.strip()] = value.strip()
    return out


def _csv_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _load(args) -> ScenarioConfig:
    overrides = _parse_set(args.set or [])
    if args.seed is not None:
        overrides.setdefault("seed", str(args.seed))
        overrides.setdefault("code.seed", str(args.seed))
    preset = args.preset
    if preset is None and args.config is None:
        preset = "desk"
    return load_scenario(args.config, preset, overrides)


def _cmd_presets(args) -> int:
    for name, values in PRESETS.items():
        print(f"[{name}]")
        for key, value in values.items():
            print(f"  {key} = {value}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    res = generate(_load(args), args.out)
    for path in res.products:
        print(path)
    return EXIT_OK


def _cmd_run(args) -> int:
    res = run(_load(args), args.out, figures=False if args.no_figures else None)
    for m in res.metrics:
        print(f"{m.name}\t{m.value:.6g}\t{m.unit}")
    log.info("wrote %d products to %s", len(res.products), res.out_dir)
    return EXIT_OK


def _sweep_value(axis: str, text: str):
    if axis == "phase_type":
        return text
    try:
        return int(text) if axis == "n_chips" else float(text)
    except ValueError:
        raise ConfigError("--values", f"cannot parse {text!r} for axis {axis}") from None


def _cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise ConfigError("--axis", f"unsupported sweep axis {args.axis!r}; supported: {', '.join(SWEEP_AXES)}")
    values = [_sweep_value(args.axis, v) for v in _csv_list(args.values)]
    if not values:
        raise ConfigError("--values", "no sweep values given")
    try:
        seeds = [int(s) for s in _csv_list(args.seeds)]
    except ValueError:
        raise ConfigError("--seeds", f"expected comma-separated integers, got {args.seeds!r}") from None
    types = _csv_list(args.types) if args.types else None
    rows = sweep(_load(args), args.axis, values, types=types, seeds=seeds or [0],
                 jobs=args.jobs, out_dir=args.out, figures=not args.no_figures)
    print("value\tphase_type\tseed\tpsl_db\tpapr")
    for r in rows:
        print(f"{r['value']}\t{r['phase_type']}\t{r['seed']}\t{r['psl_db']:.2f}\t{r['papr']:.3f}")
    return EXIT_OK


def _cmd_compare_mf(args) -> int:
    r, chain_db, mf_db = compare_matched_filter(_load(args), args.out, figures=not args.no_figures)
    print(f"chain peak at {r[chain_db.argmax()]:.3f} m, matched filter peak at {r[mf_db.argmax()]:.3f} m")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spcfmcw", description="Smoothed phase-coded FMCW radar simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser, out_default: str) -> None:
        p.add_argument("--config", metavar="PATH", help="key=value scenario file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario (default: desk)")
        p.add_argument("--seed", type=int, help="seed for code and noise")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one key (repeatable)")
        p.add_argument("--out", metavar="DIR", default=out_default, help=f"output directory (default: {out_default})")

    sub.add_parser("presets", help="list built-in scenarios").set_defaults(func=_cmd_presets)

    p = sub.add_parser("generate", help="dump the transmitted waveform")
    scenario_args(p, "out/generate")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run", help="simulate one scenario")
    scenario_args(p, "out/run")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="metrics over one parameter axis")
    scenario_args(p, "out/sweep")
    p.add_argument("--axis", required=True, help=f"one of: {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--types", help="comma-separated phase types (default: bpsk,gaussian,gmsk; 'fmcw' allowed)")
    p.add_argument("--seeds", default="0", help="comma-separated seeds (default: 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare-mf", help="proposed chain vs matched filter")
    scenario_args(p, "out/compare-mf")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_compare_mf)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
