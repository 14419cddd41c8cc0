"""Seeded synthetic market: CEX random walk, AMM swap log and injected gaps.

The AMM is kept within ``noise_amplitude`` of the CEX close at every block
(noise swaps plus a keeper swap whenever the carried price drifts too far)
except inside injected gap windows, where its price is pinned at
``close * (1 + epsilon)``. The manifest therefore lists exactly the
episodes a correctly-thresholded pipeline must find.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .amm import CpmmPool, encode_sqrt_price, price_to_tick
from .arbitrage import cpmm_cex_mav
from .errors import InvalidInputError
from .ingest import CexTick, SwapEventRecord, VenueConfig, write_cex, write_swaps


@dataclass(frozen=True)
class GapSpec:
    """A gap of relative size ``epsilon`` held for ``persistence_blocks`` analysed blocks.

    ``start`` counts analysed blocks from the start of the run (blocks on
    chains with block time >= 1 s, seconds on faster chains).
    """

    start: int
    epsilon: float
    persistence_blocks: int


@dataclass(frozen=True)
class SimSpec:
    seed: int = 0
    duration_sec: int = 3600
    volatility: float = 1e-4  # log-return std per sqrt(second)
    noise_intensity: float = 0.7  # mean noise swaps per block
    noise_amplitude: float = 2e-4  # max relative AMM deviation outside gaps
    gaps: Tuple[GapSpec, ...] = ()
    initial_price: float = 2000.0
    initial_reserve_x: float = 1000.0
    start_timestamp: int = 1_704_067_200  # 2024-01-01T00:00:00Z
    start_block: int = 1_000_000
    gas_l1_usd: float = 0.0
    gas_l2_usd: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gaps", tuple(sorted(self.gaps, key=lambda g: g.start)))
        for name in ("volatility", "noise_intensity", "noise_amplitude", "gas_l1_usd", "gas_l2_usd"):
            if not getattr(self, name) >= 0:
                raise InvalidInputError(f"{name} must be >= 0")
        if self.duration_sec < 2:
            raise InvalidInputError("duration_sec must be at least 2")
        if not (self.initial_price > 0 and self.initial_reserve_x > 0):
            raise InvalidInputError("initial price and reserve must be positive")
        prev_end = 0
        for g in self.gaps:
            if g.persistence_blocks < 1:
                raise InvalidInputError("gap persistence must be at least one block")
            if g.start < 1:
                raise InvalidInputError("gaps cannot start in the first analysed block")
            if g.start <= prev_end:
                raise InvalidInputError("gap windows must be separated by at least one block")
            if abs(g.epsilon) <= self.noise_amplitude:
                raise InvalidInputError("gap epsilon must exceed the noise amplitude")
            prev_end = g.start + g.persistence_blocks

    @classmethod
    def from_dict(cls, d: dict) -> "SimSpec":
        d = dict(d)
        d["gaps"] = tuple(GapSpec(int(g["start"]), float(g["epsilon"]), int(g["persistence_blocks"])) for g in d.get("gaps", ()))
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown simulation keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SimulationResult:
    spec: SimSpec
    venue: VenueConfig
    swaps: List[SwapEventRecord]
    cex: List[CexTick]
    manifest: List[dict]
    truth: List[Tuple[int, int, float]] = field(default_factory=list)  # (block, log_index, price)

    def write(self, out_dir, fmt: str = "csv") -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ext = "jsonl" if fmt in ("json", "jsonl") else "csv"
        paths = {
            "swaps": write_swaps(self.swaps, out / f"swaps.{ext}", ext),
            "cex": write_cex(self.cex, out / "cex.csv"),
            "manifest": out / "manifest.json",
        }
        paths["manifest"].write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")
        return paths


def _tx_hash(seed, block, log_index):
    return "0x" + hashlib.sha256(f"{seed}:{block}:{log_index}".encode()).hexdigest()


def _block_schedule(spec: SimSpec, bt: float):
    """Raw blocks as (block_number, timestamp, slot) with slot = analysed-block index."""
    out = []
    k = 0
    slot = -1
    last_key = None
    while True:
        offset = math.floor(k * bt + 1e-9)
        if offset >= spec.duration_sec:
            break
        key = offset if bt < 1.0 else k
        if key != last_key:
            slot += 1
            last_key = key
        out.append((spec.start_block + k, spec.start_timestamp + offset, slot))
        k += 1
    return out


def simulate_market(spec: SimSpec, venue: VenueConfig) -> SimulationResult:
    """Generate a swap log, CEX closes and a ground-truth gap manifest."""
    rng = np.random.default_rng(spec.seed)
    n = spec.duration_sec
    steps = rng.normal(0.0, spec.volatility, n - 1)
    closes = spec.initial_price * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
    cex = [CexTick(spec.start_timestamp + i, float(closes[i])) for i in range(n)]

    schedule = _block_schedule(spec, venue.block_time_sec)
    n_slots = schedule[-1][2] + 1
    window = {}
    for g in spec.gaps:
        if g.start + g.persistence_blocks >= n_slots:
            raise InvalidInputError("gap window must end before the last analysed block")
        for s in range(g.start, g.start + g.persistence_blocks):
            window[s] = g

    t0, t1 = venue.token0, venue.token1
    base_dec, quote_dec = venue.base.decimals, venue.quote.decimals
    liq_scale = 10.0 ** ((t0.decimals + t1.decimals) / 2.0)
    a = spec.noise_amplitude
    pool = CpmmPool(spec.initial_reserve_x, spec.initial_reserve_x * spec.initial_price, fee=venue.fees)

    swaps: List[SwapEventRecord] = []
    truth = []
    first_pinned: Dict[int, Tuple[int, CpmmPool, float]] = {}
    retained: Dict[int, Tuple[int, int]] = {}  # slot -> (block, ts) of its last raw block

    def move_to(target, block, ts, log_index):
        nonlocal pool
        k = pool.invariant
        x_new, y_new = math.sqrt(k / target), math.sqrt(k * target)
        d_base, d_quote = x_new - pool.reserve_x, y_new - pool.reserve_y
        pool = CpmmPool(x_new, y_new, fee=venue.fees)
        price = pool.spot_price
        p01 = price if venue.base_token == 0 else 1.0 / price
        raw_base = int(round(d_base * 10**base_dec))
        raw_quote = int(round(d_quote * 10**quote_dec))
        amount0, amount1 = (raw_base, raw_quote) if venue.base_token == 0 else (raw_quote, raw_base)
        l1 = l2 = None
        if spec.gas_l1_usd > 0 or spec.gas_l2_usd > 0:
            l1 = float(spec.gas_l1_usd * rng.exponential())
            l2 = float(spec.gas_l2_usd * rng.exponential())
        swaps.append(SwapEventRecord(
            block_number=block,
            timestamp_sec=ts,
            tx_hash=_tx_hash(spec.seed, block, log_index),
            log_index=log_index,
            amount0=amount0,
            amount1=amount1,
            sqrt_price_x96=encode_sqrt_price(p01, t0, t1),
            liquidity=int(round(pool.liquidity * liq_scale)),
            tick=price_to_tick(p01 * 10.0 ** (t1.decimals - t0.decimals)),
            l1_fee_usd=l1,
            l2_fee_usd=l2,
        ))
        truth.append((block, log_index, price))

    for idx, (block, ts, slot) in enumerate(schedule):
        close = float(closes[ts - spec.start_timestamp])
        retained[slot] = (block, ts)
        log_index = 0
        for _ in range(int(rng.poisson(spec.noise_intensity))):
            move_to(close * (1.0 + rng.uniform(-a, a)), block, ts, log_index)
            log_index += 1
        g = window.get(slot)
        if g is not None:
            move_to(close * (1.0 + g.epsilon), block, ts, log_index)
            if g.start == slot:
                # on sub-second chains the slot's last block overwrites earlier ones
                first_pinned[g.start] = (block, pool, close)
        elif idx == 0 or abs(pool.spot_price / close - 1.0) > a:
            move_to(close * (1.0 + rng.uniform(-a, a)), block, ts, log_index)

    manifest = []
    for g in spec.gaps:
        _, pinned_pool, close = first_pinned[g.start]
        start_block, start_ts = retained[g.start]
        end_block, end_ts = retained[g.start + g.persistence_blocks]
        manifest.append({
            "start_block": start_block,
            "end_block": end_block,
            "epsilon": g.epsilon,
            "persistence_blocks": g.persistence_blocks,
            "implied_mav": cpmm_cex_mav(pinned_pool, close, venue.fees).mav,
            "decay_seconds": end_ts - start_ts,
        })
    return SimulationResult(spec, venue, swaps, cex, manifest, truth)


def random_gap_schedule(rng: np.random.Generator, n_gaps: int, eps_range=(0.001, 0.01), persistence_range=(5, 50), spacing=(20, 60), first=10) -> Tuple[GapSpec, ...]:
    """Non-overlapping gaps with random sign, size and persistence."""
    gaps = []
    start = first
    for _ in range(n_gaps):
        eps = float(rng.uniform(*eps_range)) * (1 if rng.random() < 0.5 else -1)
        pers = int(rng.integers(persistence_range[0], persistence_range[1] + 1))
        gaps.append(GapSpec(start, eps, pers))
        start += pers + int(rng.integers(spacing[0], spacing[1] + 1))
    return tuple(gaps)
