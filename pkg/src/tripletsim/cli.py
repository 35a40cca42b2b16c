"""``tripletsim`` command line: ``report``, ``sweep`` and ``simulate``.

Machine-readable output goes to ``--out`` or stdout; logs go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .params import ConfigError, load_config_file
from .report import (FIGURE_FIELDS, Axis, SweepSpec, build_report, simulate_comparison,
                     sweep, sweep_csv, sweep_document)

log = logging.getLogger("tripletsim")


def _int_list(text: str) -> list:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("offsets must be integers >= 1")
    return vals


def _axis(text: str) -> Axis:
    try:
        return Axis.parse(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="JSON parameter file")
    shared.add_argument("--out", type=Path, help="output file (default: stdout)")
    shared.add_argument("--format", choices=("json", "csv"))
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tripletsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("report", parents=[shared], help="analytic figures at one parameter point")

    sw = sub.add_parser("sweep", parents=[shared], help="grid of analytic figures")
    sw.add_argument("--axis1", type=_axis, default=Axis("mean_photon_primary", 0.01, 1.0, 12),
                    help="PATH:MIN:MAX:STEPS[:log] (default mean_photon_primary:0.01:1:12)")
    sw.add_argument("--axis2", type=_axis, default=Axis("i1_arm.overall", 0.01, 0.3, 12),
                    help="PATH:MIN:MAX:STEPS[:log] (default i1_arm.overall:0.01:0.3:12)")
    sw.add_argument("--quantities", default="r_printed,r_consistent",
                    help="comma-separated figure names, or 'all'")
    sw.add_argument("--workers", type=int, default=1)

    sim = sub.add_parser("simulate", parents=[shared], help="Monte Carlo run vs analytics")
    sim.add_argument("--pulses", type=int, default=1_000_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--offsets", type=_int_list, default=[1], help="e.g. 1,2,3")
    sim.add_argument("--partitions", type=int, default=1)
    sim.add_argument("--jitter", type=float, default=0.0,
                     help="detector timing jitter sigma in seconds (enables timestamp mode)")
    sim.add_argument("--backend", choices=("compiled", "python"))
    return parser


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list):
        out[prefix] = ";".join(str(x) for x in obj)
    else:
        out[prefix] = obj


def _key_value_csv(doc: dict) -> str:
    flat: dict = {}
    _flatten("", doc, flat)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in flat.items():
        w.writerow([k, "" if v is None else v])
    return buf.getvalue()


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
        log.info("wrote %s", out)


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def cmd_report(args) -> str:
    doc = build_report(load_config_file(args.config))
    return _key_value_csv(doc) if args.format == "csv" else _json(doc)


def cmd_sweep(args) -> str:
    p = load_config_file(args.config)
    q = FIGURE_FIELDS if args.quantities == "all" else tuple(
        s.strip() for s in args.quantities.split(",") if s.strip())
    spec = SweepSpec(args.axis1, args.axis2, q)
    log.info("sweeping %d x %d grid", spec.axis1.steps, spec.axis2.steps)
    rows = sweep(p, spec, workers=args.workers)
    if args.format == "json":
        return _json(sweep_document(p, spec, rows))
    return sweep_csv(spec, rows)


def cmd_simulate(args) -> str:
    p = load_config_file(args.config)
    log.info("simulating %d pulses (seed %d, %d partitions)", args.pulses, args.seed,
             args.partitions)
    doc = simulate_comparison(p, args.pulses, args.seed, args.offsets, args.partitions,
                              args.jitter, args.backend)
    if "insufficient_n" in doc["flags"]:
        log.warning("fewer than 100 pulses: z-scores omitted")
    return _key_value_csv(doc) if args.format == "csv" else _json(doc)


COMMANDS = {"report": cmd_report, "sweep": cmd_sweep, "simulate": cmd_simulate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        _emit(COMMANDS[args.command](args), args.out)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
