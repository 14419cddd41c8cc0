"""Episode-filtered empirical MAV, decay times and net LVR.

A block-level AMM price series is paired with per-second CEX closes. Blocks
whose relative gap ``|P_amm - P_cex| / P_cex`` strictly exceeds a threshold
form episodes; each episode contributes only its peak MAV, whereas net LVR
sums the MAV of every block.
"""
from __future__ import annotations

import bisect
import csv
import datetime as _dt
import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .amm import FeeParams, Pool
from .arbitrage import ArbOpportunity, Direction, amm_amm_mav, pool_cex_mav
from .errors import EmptySeriesError, InsufficientDataError, InvalidInputError
from .ingest import BlockQuote, CexTick

log = logging.getLogger(__name__)

QUANTILE_METHOD = "linear"  # numpy/Hyndman-Fan type 7


@dataclass(frozen=True)
class AlignedRecord:
    block_number: int
    timestamp_sec: int
    amm_price: float
    cex_price: float
    pool: Optional[Pool]
    traded: bool
    volume: float = 0.0
    liquidity: float = 0.0

    @property
    def gap(self) -> float:
        return abs(self.amm_price - self.cex_price) / self.cex_price


@dataclass(frozen=True)
class AlignedSeries:
    records: Tuple[AlignedRecord, ...]
    block_time_sec: float
    chain: str = ""
    name: str = ""
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for a, b in zip(self.records, self.records[1:]):
            if b.block_number <= a.block_number:
                raise InvalidInputError("block numbers must strictly increase")

    def __len__(self):
        return len(self.records)

    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records], dtype=float)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp_sec for r in self.records], dtype=np.int64)


def align(amm_blocks: Sequence[BlockQuote], cex_ticks: Sequence[CexTick], block_time: float, chain: str = "", name: str = "") -> AlignedSeries:
    """Pair per-block AMM state with the latest CEX close at or before each block.

    Blocks without a swap carry the previous snapshot forward with
    ``traded=False``. On chains faster than one block per second only the
    last block of each second is kept (volume is summed over the second and
    ``traded`` is set if any of its blocks traded). Blocks before the first
    swap, before the first CEX close or after the last CEX close are dropped
    and counted in ``dropped``.
    """
    dropped = 0
    carried = []  # (block, ts, snapshot, traded, volume)
    last = None
    for q in amm_blocks:
        if q.snapshot is not None:
            last = q.snapshot
        if last is None:
            dropped += 1
            continue
        vol = q.snapshot.volume if q.snapshot is not None else 0.0
        carried.append((q.block_number, q.timestamp_sec, last, q.snapshot is not None, vol))

    if block_time < 1.0:
        grouped = []
        for item in carried:
            if grouped and grouped[-1][1] == item[1]:
                prev = grouped[-1]
                grouped[-1] = (item[0], item[1], item[2], prev[3] or item[3], prev[4] + item[4])
            else:
                grouped.append(item)
        carried = grouped

    cex_ts = [t.timestamp_sec for t in cex_ticks]
    records = []
    for block, ts, snap, traded, vol in carried:
        k = bisect.bisect_right(cex_ts, ts) - 1
        if k < 0 or ts > cex_ts[-1]:
            dropped += 1
            continue
        records.append(AlignedRecord(block, ts, snap.price, cex_ticks[k].close, snap.pool, traded, vol, snap.liquidity))
    if not records:
        raise EmptySeriesError("no AMM block overlaps the CEX series")
    if dropped:
        log.info("align: dropped %d block records", dropped)
    return AlignedSeries(tuple(records), block_time, chain, name, dropped)


# ---------------------------------------------------------------------------
# threshold


class ThresholdMethod(enum.Enum):
    IQR = "iqr"
    FIXED = "fixed"


@dataclass(frozen=True)
class ThresholdConfig:
    method: ThresholdMethod = ThresholdMethod.IQR
    iqr_multiplier: float = 1.5
    fixed_value: Optional[float] = None
    quantile_method: str = QUANTILE_METHOD

    def __post_init__(self):
        if not self.iqr_multiplier > 0:
            raise InvalidInputError("iqr_multiplier must be positive")
        if self.method is ThresholdMethod.FIXED and (self.fixed_value is None or self.fixed_value < 0):
            raise InvalidInputError("fixed threshold needs a non-negative value")

    @classmethod
    def fixed(cls, value: float) -> "ThresholdConfig":
        return cls(ThresholdMethod.FIXED, fixed_value=float(value))

    @classmethod
    def parse(cls, text: str) -> "ThresholdConfig":
        """``iqr:K`` or ``fixed:V``."""
        kind, _, val = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "iqr":
                return cls(ThresholdMethod.IQR, iqr_multiplier=float(val) if val else 1.5)
            if kind == "fixed":
                return cls.fixed(float(val))
        except ValueError:
            pass
        raise InvalidInputError(f"threshold must look like iqr:K or fixed:V, got {text!r}")

    def describe(self) -> str:
        if self.method is ThresholdMethod.FIXED:
            return f"fixed:{self.fixed_value!r}"
        return f"iqr:{self.iqr_multiplier!r}"


def derive_threshold(series, cfg: ThresholdConfig = ThresholdConfig()) -> float:
    """Upper Tukey fence ``Q3 + k (Q3 - Q1)`` of the absolute relative gaps.

    Quartiles use linear interpolation between order statistics (numpy's
    default ``"linear"`` rule). ``series`` may be an :class:`AlignedSeries`
    or an array of gaps.
    """
    if cfg.method is ThresholdMethod.FIXED:
        return float(cfg.fixed_value)
    d = series.gaps() if isinstance(series, AlignedSeries) else np.asarray(series, dtype=float)
    if d.size < 4:
        raise InsufficientDataError(f"need at least 4 observations, got {d.size}")
    q1, q3 = np.quantile(d, [0.25, 0.75], method=cfg.quantile_method)
    return float(q3 + cfg.iqr_multiplier * (q3 - q1))


# ---------------------------------------------------------------------------
# episodes


def find_runs(gaps: Sequence[float], threshold: float) -> List[Tuple[int, Optional[int]]]:
    """Maximal runs of ``gap > threshold`` as ``(start, end)`` index pairs.

    ``end`` is the first index back at or below the threshold, or ``None``
    when the run is still open at the end of the data.
    """
    runs = []
    start = None
    for i, d in enumerate(gaps):
        if d > threshold:
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, None))
    return runs


@dataclass(frozen=True)
class DecayTime:
    from_peak: Optional[float]
    from_start: Optional[float]
    censored: bool


@dataclass(frozen=True)
class Episode:
    start_block: int
    end_block: Optional[int]  # first block back at/below threshold; None if censored
    peak_block: int
    peak: ArbOpportunity
    decay_seconds_from_peak: Optional[float]
    decay_seconds_from_start: Optional[float]
    block_count: int
    start_index: int
    peak_index: int
    end_index: Optional[int]
    peak_gap: float = 0.0

    @property
    def censored(self) -> bool:
        return self.end_index is None


def block_mavs(series: AlignedSeries, fees: Optional[FeeParams] = None, pools: Optional[Mapping[int, Pool]] = None) -> List[ArbOpportunity]:
    """Per-block MAV against the paired CEX close."""
    out = []
    for r in series.records:
        pool = pools.get(r.block_number, r.pool) if pools is not None else r.pool
        out.append(pool_cex_mav(pool, r.cex_price, fees))
    return out


def decay_times(episodes: Sequence[Episode], series: AlignedSeries) -> List[DecayTime]:
    """Seconds from peak (and from start) until the first re-aligned block."""
    ts = [r.timestamp_sec for r in series.records]
    out = []
    for ep in episodes:
        if ep.end_index is None:
            out.append(DecayTime(None, None, True))
            continue
        end = ts[ep.end_index]
        out.append(DecayTime(float(end - ts[ep.peak_index]), float(end - ts[ep.start_index]), False))
    return out


def detect_episodes(series: AlignedSeries, threshold: float, pools: Optional[Mapping[int, Pool]] = None, fees: Optional[FeeParams] = None, mavs: Optional[Sequence[ArbOpportunity]] = None) -> List[Episode]:
    """Split the series into misalignment episodes and keep each one's peak MAV.

    An episode opens at a block with gap strictly above ``threshold`` and
    closes before the first later block at or below it. Carried-forward
    (non-trading) blocks count like any other block. The peak is the
    in-episode block with the largest MAV (earliest on ties).
    """
    if not threshold >= 0:
        raise InvalidInputError("threshold must be non-negative")
    gaps = series.gaps()
    if mavs is None:
        mavs = block_mavs(series, fees, pools)
    recs = series.records
    raw = []
    for start, end in find_runs(gaps, threshold):
        stop = len(recs) if end is None else end
        peak = max(range(start, stop), key=lambda k: (mavs[k].mav, -k))
        raw.append((start, end, peak))
    stub = [
        Episode(recs[s].block_number, None, recs[p].block_number, mavs[p], None, None, 0, s, p, e)
        for s, e, p in raw
    ]
    decays = decay_times(stub, series)
    out = []
    for (s, e, p), dt in zip(raw, decays):
        stop = len(recs) if e is None else e
        out.append(Episode(
            start_block=recs[s].block_number,
            end_block=None if e is None else recs[e].block_number,
            peak_block=recs[p].block_number,
            peak=mavs[p],
            decay_seconds_from_peak=dt.from_peak,
            decay_seconds_from_start=dt.from_start,
            block_count=stop - s,
            start_index=s,
            peak_index=p,
            end_index=e,
            peak_gap=float(gaps[p]),
        ))
    return out


@dataclass(frozen=True)
class LvrAccumulator:
    total_net_lvr: float
    contributions: Tuple[float, ...]


def accumulate_lvr(series: AlignedSeries, pools: Optional[Mapping[int, Pool]] = None, fees: Optional[FeeParams] = None, mavs: Optional[Sequence[ArbOpportunity]] = None) -> LvrAccumulator:
    """Net LVR: per-block MAV summed over every block, with no filtering."""
    if len(series) == 0:
        raise EmptySeriesError("empty series")
    if mavs is None:
        mavs = block_mavs(series, fees, pools)
    contrib = tuple(m.mav for m in mavs)
    return LvrAccumulator(math.fsum(contrib), contrib)


# ---------------------------------------------------------------------------
# venue report

EPISODE_COLUMNS = ("start_block", "peak_block", "end_block", "peak_mav", "dx_max", "decay_peak_s", "decay_start_s")


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values) if values else None


@dataclass(frozen=True)
class VenueReport:
    name: str
    chain: str
    block_time_sec: float
    threshold: float
    threshold_rule: str
    episodes: Tuple[Episode, ...]
    totals: Dict[str, Optional[float]]
    counts: Dict[str, Optional[float]]
    dropped_records: int = 0

    def to_dict(self) -> dict:
        return {
            "venue": self.name,
            "chain": self.chain,
            "block_time_sec": self.block_time_sec,
            "threshold": self.threshold,
            "threshold_rule": self.threshold_rule,
            "dropped_records": self.dropped_records,
            "totals": dict(self.totals),
            "counts": dict(self.counts),
            "episodes": [_episode_row(e) for e in self.episodes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def episodes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EPISODE_COLUMNS)
        for e in self.episodes:
            row = _episode_row(e)
            w.writerow(["" if row[c] is None else row[c] for c in EPISODE_COLUMNS])
        return buf.getvalue()


def _episode_row(e: Episode) -> dict:
    return {
        "start_block": e.start_block,
        "peak_block": e.peak_block,
        "end_block": e.end_block,
        "peak_mav": e.peak.mav,
        "dx_max": e.peak.dx_max,
        "direction": e.peak.direction.value,
        "peak_gap": e.peak_gap,
        "block_count": e.block_count,
        "decay_peak_s": e.decay_seconds_from_peak,
        "decay_start_s": e.decay_seconds_from_start,
        "censored": e.censored,
    }


def analyze_venue(series: AlignedSeries, cfg: ThresholdConfig = ThresholdConfig(), fees: Optional[FeeParams] = None, pools: Optional[Mapping[int, Pool]] = None) -> VenueReport:
    """Threshold, episodes, decay statistics and MAV/LVR totals for one venue."""
    threshold = derive_threshold(series, cfg)
    mavs = block_mavs(series, fees, pools)
    episodes = detect_episodes(series, threshold, mavs=mavs)
    lvr = accumulate_lvr(series, mavs=mavs)
    mav_total = math.fsum(e.peak.mav for e in episodes)
    volume = math.fsum(r.volume for r in series.records)
    finished = [e for e in episodes if not e.censored]
    totals = {
        "mav_total": mav_total,
        "lvr_total": lvr.total_net_lvr,
        "volume_total": volume,
        "mav_pct_of_volume": mav_total / volume if volume > 0 else None,
        "lvr_pct_of_volume": lvr.total_net_lvr / volume if volume > 0 else None,
    }
    counts = {
        "episodes": len(episodes),
        "censored_episodes": len(episodes) - len(finished),
        "blocks": len(series),
        "avg_mav": _mean(e.peak.mav for e in episodes),
        "avg_dx_max": _mean(e.peak.dx_max for e in episodes),
        "avg_decay_seconds": _mean(e.decay_seconds_from_peak for e in finished),
        "avg_decay_seconds_from_start": _mean(e.decay_seconds_from_start for e in finished),
    }
    return VenueReport(series.name, series.chain, series.block_time_sec, threshold, cfg.describe(), tuple(episodes), totals, counts, series.dropped)


DAILY_COLUMNS = ("date", "mav_sum", "max_gap", "liquidity")


def daily_series(series: AlignedSeries, episodes: Sequence[Episode]) -> List[dict]:
    """Per UTC day: summed episode MAV (by peak day), max gap, end-of-day liquidity."""
    days: Dict[int, dict] = {}
    for r in series.records:
        d = days.setdefault(r.timestamp_sec // 86400, {"mav": [], "max_gap": 0.0, "liquidity": 0.0})
        d["max_gap"] = max(d["max_gap"], r.gap)
        d["liquidity"] = r.liquidity
    for e in episodes:
        day = series.records[e.peak_index].timestamp_sec // 86400
        days[day]["mav"].append(e.peak.mav)
    out = []
    for day in sorted(days):
        d = days[day]
        date = _dt.datetime.fromtimestamp(day * 86400, tz=_dt.timezone.utc).date().isoformat()
        out.append({"date": date, "mav_sum": math.fsum(d["mav"]), "max_gap": d["max_gap"], "liquidity": d["liquidity"]})
    return out


# ---------------------------------------------------------------------------
# cross-venue matrices

CEX_NAME = "CEX"


@dataclass(frozen=True)
class CrossMatrix:
    names: Tuple[str, ...]
    gap: np.ndarray  # mean relative price difference
    mav: np.ndarray  # episode-filtered MAV totals
    excluded: Tuple[str, ...] = ()
    thresholds: Dict[Tuple[str, str], float] = field(default_factory=dict)

    def to_csv(self, which: str = "gap") -> str:
        m = self.gap if which == "gap" else self.mav
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["venue", *self.names])
        for name, row in zip(self.names, m):
            w.writerow([name, *("" if math.isnan(v) else repr(float(v)) for v in row)])
        return buf.getvalue()


def _pair_records(a: AlignedSeries, b: AlignedSeries):
    ta = {r.timestamp_sec: r for r in a.records}
    tb = {r.timestamp_sec: r for r in b.records}
    common = sorted(set(ta) & set(tb))
    return [(ta[t], tb[t]) for t in common]


def pair_statistics(a: AlignedSeries, b: AlignedSeries, cfg: ThresholdConfig):
    """Mean gap, episode-filtered two-pool MAV and threshold for two AMM venues.

    The pair is observed on the seconds both series have a record. The gap
    is relative to the midpoint of the two prices so it is symmetric.
    Returns None when the series share no second.
    """
    pairs = _pair_records(a, b)
    if not pairs:
        return None
    gaps = np.array([abs(ra.amm_price - rb.amm_price) / (0.5 * (ra.amm_price + rb.amm_price)) for ra, rb in pairs])
    threshold = derive_threshold(gaps, cfg) if len(gaps) >= 4 or cfg.method is ThresholdMethod.FIXED else math.inf
    total = []
    for start, end in find_runs(gaps, threshold):
        stop = len(pairs) if end is None else end
        best = 0.0
        for ra, rb in pairs[start:stop]:
            if ra.pool is None or rb.pool is None:
                continue
            best = max(best, amm_amm_mav(ra.pool, rb.pool).mav)
        total.append(best)
    return float(np.mean(gaps)), math.fsum(total), threshold


def cross_matrix(venues: Sequence[AlignedSeries], cfg: ThresholdConfig = ThresholdConfig(), fees: Optional[Sequence[Optional[FeeParams]]] = None, include_cex: bool = True) -> CrossMatrix:
    """Symmetric mean-gap and MAV matrices over venues (plus the CEX).

    AMM pairs use the fee-free two-pool MAV; AMM-vs-CEX entries use the
    venue's own episode pipeline. Pairs without common seconds are NaN and
    listed in ``excluded``.
    """
    if len(venues) + (1 if include_cex else 0) < 2:
        raise InvalidInputError("need at least two venues")
    names = [v.name or f"venue{i}" for i, v in enumerate(venues)]
    if include_cex:
        names.append(CEX_NAME)
    n = len(names)
    gap = np.zeros((n, n))
    mav = np.zeros((n, n))
    excluded = []
    thresholds = {}
    fees = list(fees) if fees is not None else [None] * len(venues)
    for i in range(len(venues)):
        for j in range(i + 1, len(venues)):
            stats = pair_statistics(venues[i], venues[j], cfg)
            if stats is None:
                gap[i, j] = gap[j, i] = mav[i, j] = mav[j, i] = math.nan
                excluded.append(f"{names[i]} x {names[j]}: no common seconds")
                log.warning("cross: %s", excluded[-1])
                continue
            g, m, th = stats
            gap[i, j] = gap[j, i] = g
            mav[i, j] = mav[j, i] = m
            thresholds[(names[i], names[j])] = th
        if include_cex:
            c = n - 1
            rep = analyze_venue(venues[i], cfg, fees[i])
            gap[i, c] = gap[c, i] = float(np.mean(venues[i].gaps()))
            mav[i, c] = mav[c, i] = rep.totals["mav_total"]
            thresholds[(names[i], CEX_NAME)] = rep.threshold
    return CrossMatrix(tuple(names), gap, mav, tuple(excluded), thresholds)


def series_from_prices(prices, cex, timestamps=None, pools=None, traded=None, block_time: float = 1.0, start_block: int = 0, volumes=None, name: str = "") -> AlignedSeries:
    """Build an aligned series directly from arrays (fixtures and notebooks)."""
    n = len(prices)
    timestamps = list(range(n)) if timestamps is None else list(timestamps)
    recs = []
    for k in range(n):
        pool = pools[k] if pools is not None else None
        recs.append(AlignedRecord(
            block_number=start_block + k,
            timestamp_sec=int(timestamps[k]),
            amm_price=float(prices[k]),
            cex_price=float(cex[k]),
            pool=pool,
            traded=True if traded is None else bool(traded[k]),
            volume=0.0 if volumes is None else float(volumes[k]),
            liquidity=pool.liquidity if pool is not None else 0.0,
        ))
    return AlignedSeries(tuple(recs), block_time, name=name)
