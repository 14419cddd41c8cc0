"""Per-swap cost decomposition and segment fee tables.

    total = L1 fee + L2 fee + LP fee + block slippage + price impact

Every component is reported in quote units (USD for USDC pools) and in basis
points of the swap's quote volume.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .amm import FeeParams
from .ingest import SwapDataset, SwapEventRecord, VenueConfig, base_amount, quote_amount, quote_price

COMPONENTS = ("l1_fee", "l2_fee", "lp_fee", "block_slippage", "price_impact")
TABLE_COMPONENTS = ("total", "gas_fee") + COMPONENTS + ("slippage_and_impact",)
SEGMENTS = ("whole", "pre_cutoff", "post_cutoff")


@dataclass(frozen=True)
class FeeBreakdown:
    l1_fee: float
    l2_fee: float
    lp_fee: float
    block_slippage: float
    price_impact: float
    total: float
    volume: float
    timestamp_sec: int
    block_number: int = 0
    log_index: int = 0
    gas_missing: bool = False

    @property
    def gas_fee(self) -> float:
        return self.l1_fee + self.l2_fee

    @property
    def slippage_and_impact(self) -> float:
        return self.block_slippage + self.price_impact

    def usd(self, component: str) -> float:
        return getattr(self, component)

    def bps(self, component: str) -> float:
        return self.usd(component) / self.volume * 1e4 if self.volume > 0 else 0.0


def decompose_swap(record: SwapEventRecord, venue: VenueConfig, pre_price: float, block_start_price: Optional[float] = None, fees: Optional[FeeParams] = None) -> FeeBreakdown:
    """Split one swap's cost into gas, LP fee, block slippage and price impact.

    ``pre_price`` is the pool price immediately before the swap and
    ``block_start_price`` the price at the start of its block (``None`` for
    the block's first swap). With ``dx`` the base amount traded:

    * price impact = ``|dx| * |P_after - P_before|``, i.e. the swap's value
      at the pre-trade price times its relative price move;
    * block slippage = ``|dx| * |P_before - P_block_start|``, the change in
      execution value caused by earlier swaps in the same block.

    Missing gas fields count as zero and set ``gas_missing``.
    """
    fees = fees or venue.fees
    dx = abs(base_amount(record, venue))
    volume = abs(quote_amount(record, venue))
    post = quote_price(record, venue)
    impact = dx * abs(post - pre_price)
    slippage = 0.0 if block_start_price is None else dx * abs(pre_price - block_start_price)
    lp = fees.lp_fee * volume
    missing = record.l1_fee_usd is None or record.l2_fee_usd is None
    l1 = record.l1_fee_usd or 0.0
    l2 = record.l2_fee_usd or 0.0
    total = math.fsum((l1, l2, lp, slippage, impact))
    return FeeBreakdown(l1, l2, lp, slippage, impact, total, volume, record.timestamp_sec, record.block_number, record.log_index, missing)


def decompose_dataset(dataset: SwapDataset, fees: Optional[FeeParams] = None) -> Tuple[List[FeeBreakdown], int]:
    """Decompose every swap that has a known pre-swap state.

    The pre-swap price is the previous swap's post-swap price, so the first
    swap of the file is skipped. Returns ``(breakdowns, skipped)``.
    """
    venue = dataset.venue
    out = []
    records = dataset.records
    if not records:
        return out, 0
    prev_price = quote_price(records[0], venue)
    block_start = prev_price
    for prev, rec in zip(records, records[1:]):
        first_in_block = rec.block_number != prev.block_number
        if first_in_block:
            block_start = prev_price
        out.append(decompose_swap(rec, venue, prev_price, None if first_in_block else block_start, fees))
        prev_price = quote_price(rec, venue)
    return out, 1


@dataclass(frozen=True)
class SegmentStats:
    count: int
    mean_usd: Optional[Dict[str, float]]
    mean_bps: Optional[Dict[str, float]]
    volume_weighted_bps: Optional[Dict[str, float]]


@dataclass(frozen=True)
class CostTable:
    segments: Dict[str, SegmentStats]
    cutoff_timestamp: Optional[int]

    def rows(self) -> List[dict]:
        out = []
        for seg in SEGMENTS:
            st = self.segments[seg]
            for comp in TABLE_COMPONENTS:
                out.append({
                    "segment": seg,
                    "component": comp,
                    "usd": None if st.mean_usd is None else st.mean_usd[comp],
                    "bps": None if st.mean_bps is None else st.mean_bps[comp],
                    "bps_volume_weighted": None if st.volume_weighted_bps is None else st.volume_weighted_bps[comp],
                    "count": st.count,
                })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ("component", "usd", "bps", "segment", "bps_volume_weighted", "count")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows():
            w.writerow(["" if row[c] is None else row[c] for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"cutoff_timestamp": self.cutoff_timestamp, "rows": self.rows()}, indent=2, sort_keys=True) + "\n"


def _segment(records: Sequence[FeeBreakdown]) -> SegmentStats:
    if not records:
        return SegmentStats(0, None, None, None)
    n = len(records)
    vol = math.fsum(r.volume for r in records)
    usd = {c: math.fsum(r.usd(c) for r in records) / n for c in TABLE_COMPONENTS}
    bps = {c: math.fsum(r.bps(c) for r in records) / n for c in TABLE_COMPONENTS}
    vw = {c: (math.fsum(r.usd(c) for r in records) / vol * 1e4 if vol > 0 else 0.0) for c in TABLE_COMPONENTS}
    return SegmentStats(n, usd, bps, vw)


def cost_table(breakdowns: Sequence[FeeBreakdown], cutoff_timestamp: Optional[int] = None) -> CostTable:
    """Mean fee components per segment.

    Records with ``timestamp < cutoff`` are pre-cutoff, the rest post-cutoff.
    ``bps`` is the mean of per-swap bps; the volume-weighted figure is also
    given. Empty segments carry ``None`` aggregates.
    """
    pre = [b for b in breakdowns if cutoff_timestamp is not None and b.timestamp_sec < cutoff_timestamp]
    post = [b for b in breakdowns if cutoff_timestamp is None or b.timestamp_sec >= cutoff_timestamp]
    if cutoff_timestamp is None:
        post = []
    return CostTable(
        {"whole": _segment(list(breakdowns)), "pre_cutoff": _segment(pre), "post_cutoff": _segment(post)},
        cutoff_timestamp,
    )
