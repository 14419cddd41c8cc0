"""Command-line entry point: ``mavlab {mav,cross,costs,simulate}``.

Exit codes: 0 success, 2 input/validation error, 3 empty result (no swaps,
no AMM/CEX overlap, too little data for a threshold).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import yaml

from .costs import COMPONENTS, cost_table, decompose_dataset
from .episodes import (
    DAILY_COLUMNS,
    EPISODE_COLUMNS,
    ThresholdConfig,
    align,
    analyze_venue,
    cross_matrix,
    daily_series,
)
from .errors import (
    EmptySeriesError,
    InsufficientDataError,
    IntegrityError,
    InvalidInputError,
    SchemaError,
)
from .ingest import VenueConfig, block_grid, load_cex, load_swaps
from .simulate import SimSpec, simulate_market

log = logging.getLogger("mavlab")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3

RUN_KEYS = {"swaps", "cex", "threshold", "out", "seed", "format", "cutoff", "sim", "venues", "venue", "include_cex"}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    subcommand: str
    swaps: List[Path] = field(default_factory=list)
    cex: Optional[Path] = None
    venues: List[VenueConfig] = field(default_factory=list)
    threshold: ThresholdConfig = ThresholdConfig()
    out: Path = Path("out")
    seed: Optional[int] = None
    fmt: Optional[str] = None
    cutoff: Optional[int] = None
    sim: dict = field(default_factory=dict)
    include_cex: bool = False

    def validate(self):
        for p in self.swaps + ([self.cex] if self.cex else []):
            if not p.exists():
                raise CliError(f"input file not found: {p}", EXIT_INPUT)


def _read_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {p}", EXIT_INPUT)
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as e:
        raise CliError(f"cannot parse {p}: {e}", EXIT_INPUT) from None
    if not isinstance(data, dict):
        raise CliError(f"{p}: top level must be a mapping", EXIT_INPUT)
    return data


def _venues_from(data: dict) -> List[VenueConfig]:
    if "venues" in data:
        return [VenueConfig.from_dict(v) for v in data["venues"]]
    if "venue" in data:
        return [VenueConfig.from_dict(data["venue"])]
    rest = {k: v for k, v in data.items() if k not in RUN_KEYS}
    return [VenueConfig.from_dict(rest)] if rest else [VenueConfig()]


def build_run_config(args: argparse.Namespace) -> RunConfig:
    data = _read_config(args.venue_config)
    base = Path(args.venue_config).parent if args.venue_config else Path(".")

    def path_of(v):
        p = Path(v)
        return p if p.is_absolute() else base / p

    try:
        venues = _venues_from(data)
    except (TypeError, KeyError, InvalidInputError, SchemaError) as e:
        raise CliError(f"invalid venue config: {e}", EXIT_INPUT) from None

    swaps = [Path(s) for s in args.swaps] if getattr(args, "swaps", None) else [path_of(s) for s in _as_list(data.get("swaps"))]
    cex = Path(args.cex) if getattr(args, "cex", None) else (path_of(data["cex"]) if data.get("cex") else None)
    thr_text = getattr(args, "threshold", None) or data.get("threshold") or "iqr:1.5"
    try:
        threshold = ThresholdConfig.parse(str(thr_text))
    except InvalidInputError as e:
        raise CliError(str(e), EXIT_INPUT) from None
    out = Path(args.out) if args.out else Path(data.get("out", "out"))
    seed = args.seed if args.seed is not None else data.get("seed")
    fmt = args.format or data.get("format")
    cutoff = getattr(args, "cutoff", None)
    if cutoff is None:
        cutoff = data.get("cutoff")
    include_cex = bool(getattr(args, "include_cex", False) or data.get("include_cex", False))
    return RunConfig(args.command, swaps, cex, venues, threshold, out, seed, fmt, cutoff, dict(data.get("sim") or {}), include_cex)


def _as_list(v):
    if v is None:
        return []
    return v if isinstance(v, list) else [v]


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(text)


def _rows_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r[c] is None else r[c] for c in columns])
    return buf.getvalue()


def _emit(out: Path, stem: str, columns, rows, fmt) -> Path:
    """Write a table as ``stem.csv`` or, with ``fmt == "json"``, ``stem.json``."""
    if fmt == "json":
        path = out / f"{stem}.json"
        _write(path, json.dumps([{c: r[c] for c in columns} for r in rows], indent=2, sort_keys=True) + "\n")
    else:
        path = out / f"{stem}.csv"
        _write(path, _rows_csv(columns, rows))
    return path


def _venue_series(swaps: Path, cex_ticks, venue: VenueConfig):
    ds = load_swaps(swaps, venue)
    if len(ds) == 0:
        raise CliError(f"{swaps}: no swaps", EXIT_EMPTY)
    return align(block_grid(ds), cex_ticks, venue.block_time_sec, venue.chain, venue.name)


def cmd_mav(cfg: RunConfig) -> int:
    if len(cfg.swaps) != 1 or cfg.cex is None:
        raise CliError("mav needs exactly one --swaps file and a --cex file", EXIT_INPUT)
    cfg.validate()
    venue = cfg.venues[0]
    series = _venue_series(cfg.swaps[0], load_cex(cfg.cex), venue)
    report = analyze_venue(series, cfg.threshold, venue.fees)
    _write(cfg.out / "report.json", report.to_json())
    if cfg.fmt == "json":
        _emit(cfg.out, "episodes", EPISODE_COLUMNS, report.to_dict()["episodes"], "json")
    else:
        _write(cfg.out / "episodes.csv", report.episodes_csv())
    _emit(cfg.out, "daily", DAILY_COLUMNS, daily_series(series, report.episodes), cfg.fmt)
    print(cfg.out / "report.json")
    return EXIT_OK


def cmd_cross(cfg: RunConfig) -> int:
    if len(cfg.swaps) < 2 or cfg.cex is None:
        raise CliError("cross needs at least two --swaps files and a --cex file", EXIT_INPUT)
    cfg.validate()
    venues = cfg.venues
    if len(venues) != len(cfg.swaps):
        raise CliError(f"{len(cfg.swaps)} swap files but {len(venues)} venue configs", EXIT_INPUT)
    cex_ticks = load_cex(cfg.cex)
    series = [_venue_series(p, cex_ticks, v) for p, v in zip(cfg.swaps, venues)]
    m = cross_matrix(series, cfg.threshold, [v.fees for v in venues], include_cex=cfg.include_cex)
    for which, matrix in (("gap", m.gap), ("mav", m.mav)):
        if cfg.fmt == "json":
            rows = [[None if math.isnan(v) else float(v) for v in row] for row in matrix]
            _write(cfg.out / f"{which}_matrix.json", json.dumps({"venues": list(m.names), "matrix": rows}, indent=2) + "\n")
        else:
            _write(cfg.out / f"{which}_matrix.csv", m.to_csv(which))
    summary = {
        "venues": list(m.names),
        "excluded": list(m.excluded),
        "thresholds": {f"{a}|{b}": t for (a, b), t in sorted(m.thresholds.items())},
        "threshold_rule": cfg.threshold.describe(),
    }
    _write(cfg.out / "cross.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(cfg.out / "cross.json")
    return EXIT_OK


def cmd_costs(cfg: RunConfig) -> int:
    if len(cfg.swaps) != 1:
        raise CliError("costs needs exactly one --swaps file", EXIT_INPUT)
    cfg.validate()
    venue = cfg.venues[0]
    ds = load_swaps(cfg.swaps[0], venue)
    breakdowns, _ = decompose_dataset(ds)
    if not breakdowns:
        raise CliError("not enough swaps to decompose", EXIT_EMPTY)
    table = cost_table(breakdowns, cfg.cutoff)
    if cfg.fmt == "json":
        path = cfg.out / "cost_table.json"
        _write(path, table.to_json())
    else:
        path = cfg.out / "cost_table.csv"
        _write(path, table.to_csv())
    cols = ("block_number", "log_index", "timestamp_sec", "volume") + COMPONENTS + ("total", "gas_missing")
    rows = [{c: getattr(b, c) for c in cols} for b in breakdowns]
    _emit(cfg.out, "breakdowns", cols, rows, cfg.fmt)
    print(path)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    sim = dict(cfg.sim)
    if cfg.seed is not None:
        sim["seed"] = int(cfg.seed)
    try:
        spec = SimSpec.from_dict(sim)
        result = simulate_market(spec, cfg.venues[0])
    except (InvalidInputError, TypeError, KeyError, ValueError) as e:
        raise CliError(f"invalid simulation spec: {e}", EXIT_INPUT) from None
    paths = result.write(cfg.out, cfg.fmt or "csv")
    print(paths["manifest"])
    return EXIT_OK


COMMANDS = {"mav": cmd_mav, "cross": cmd_cross, "costs": cmd_costs, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mavlab", description="Non-atomic arbitrage (MAV) analysis for AMM pools.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs=True):
        fmt_help = "output table format (default csv)" if inputs else "swap file format to write (json = JSONL)"
        if inputs:
            p.add_argument("--swaps", nargs="+", metavar="PATH", help="swap event file(s); .jsonl/.json are JSONL, anything else CSV")
            p.add_argument("--cex", metavar="PATH", help="CEX closes CSV (timestamp_sec,close)")
            p.add_argument("--threshold", metavar="RULE", help="iqr:K or fixed:V (default iqr:1.5)")
        p.add_argument("--venue-config", metavar="PATH", help="YAML venue/run config; flags override it")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--format", choices=("json", "csv"), help=fmt_help)

    common(sub.add_parser("mav", help="episode-filtered MAV and net LVR for one venue"))
    p = sub.add_parser("cross", help="cross-venue gap and MAV matrices")
    common(p)
    p.add_argument("--include-cex", action="store_true", help="add the CEX as a row/column of both matrices")
    p = sub.add_parser("costs", help="swap cost decomposition table")
    common(p)
    p.add_argument("--cutoff", type=int, metavar="TS", help="segment boundary (unix seconds)")
    common(sub.add_parser("simulate", help="write a synthetic fixture and its manifest"), inputs=False)
    return parser


def _setup_logging():
    level = os.environ.get("MAVLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = build_run_config(args)
        return COMMANDS[args.command](cfg)
    except CliError as e:
        print(f"mavlab: {e}", file=sys.stderr)
        return e.code
    except (SchemaError, IntegrityError, InvalidInputError) as e:
        print(f"mavlab: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (EmptySeriesError, InsufficientDataError) as e:
        print(f"mavlab: {e}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
