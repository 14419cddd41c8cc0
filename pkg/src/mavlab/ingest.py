"""Swap-event and CEX price ingestion.

Swap files carry Uniswap-v3-shaped event fields; raw integer amounts are kept
untouched and decimals are applied only when quotes and pool snapshots are
built. Header of the CSV form::

    block_number,timestamp_sec,tx_hash,log_index,amount0,amount1,sqrtPriceX96,liquidity,tick

optionally followed by ``l1_fee_usd,l2_fee_usd``. JSONL files use the same
field names, one object per line. CEX files are ``timestamp_sec,close``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .amm import CpmmPool, FeeParams, TokenMeta, decode_sqrt_price
from .errors import IntegrityError, InvalidInputError, SchemaError

log = logging.getLogger(__name__)

SWAP_COLUMNS = (
    "block_number",
    "timestamp_sec",
    "tx_hash",
    "log_index",
    "amount0",
    "amount1",
    "sqrtPriceX96",
    "liquidity",
    "tick",
)
GAS_COLUMNS = ("l1_fee_usd", "l2_fee_usd")
CEX_COLUMNS = ("timestamp_sec", "close")

# average block times in seconds
BLOCK_TIMES = {
    "ethereum": 12.12,
    "arbitrum": 0.25,
    "base": 2.00,
    "optimism": 2.00,
    "zksync": 1.05,
}


@dataclass(frozen=True)
class SwapEventRecord:
    block_number: int
    timestamp_sec: int
    tx_hash: str
    log_index: int
    amount0: int  # pool-side signed raw amounts, positive = into the pool
    amount1: int
    sqrt_price_x96: int
    liquidity: int
    tick: int
    l1_fee_usd: Optional[float] = None
    l2_fee_usd: Optional[float] = None

    @property
    def key(self) -> Tuple[int, int]:
        return (self.block_number, self.log_index)


@dataclass(frozen=True)
class CexTick:
    timestamp_sec: int
    close: float


@dataclass(frozen=True)
class VenueConfig:
    """One AMM pool on one chain.

    ``base_token`` says which of token0/token1 is the base asset; quotes are
    then quote-per-base regardless of the pool's token ordering.
    """

    name: str = "venue"
    chain: str = "ethereum"
    block_time_sec: Optional[float] = None
    pool_kind: str = "CPMM"
    lp_fee: float = 0.0005
    cex_fee: float = 0.0
    gas_fee: float = 0.0
    token0: TokenMeta = TokenMeta("WETH", 18)
    token1: TokenMeta = TokenMeta("USDC", 6)
    base_token: int = 0

    def __post_init__(self):
        if self.block_time_sec is None:
            bt = BLOCK_TIMES.get(self.chain.lower())
            if bt is None:
                raise InvalidInputError(f"no default block time for chain {self.chain!r}")
            object.__setattr__(self, "block_time_sec", bt)
        if not self.block_time_sec > 0:
            raise InvalidInputError("block_time_sec must be positive")
        if self.pool_kind not in ("CPMM", "CLMM"):
            raise InvalidInputError(f"pool_kind must be CPMM or CLMM, got {self.pool_kind!r}")
        if self.base_token not in (0, 1):
            raise InvalidInputError("base_token must be 0 or 1")

    @property
    def fees(self) -> FeeParams:
        return FeeParams(self.lp_fee, self.cex_fee, self.gas_fee)

    @property
    def base(self) -> TokenMeta:
        return self.token0 if self.base_token == 0 else self.token1

    @property
    def quote(self) -> TokenMeta:
        return self.token1 if self.base_token == 0 else self.token0

    @classmethod
    def from_dict(cls, d: dict) -> "VenueConfig":
        d = dict(d)
        for key in ("token0", "token1"):
            if isinstance(d.get(key), dict):
                t = d[key]
                d[key] = TokenMeta(t["symbol"], int(t["decimals"]), bool(t.get("bridged", False)))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown venue keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if isinstance(v, TokenMeta):
                v = {"symbol": v.symbol, "decimals": v.decimals, "bridged": v.bridged}
            out[k] = v
        return out


# ---------------------------------------------------------------------------
# per-record decoding


def quote_price(record: SwapEventRecord, venue: VenueConfig) -> float:
    """Post-swap spot price of the base token in quote units."""
    return decode_sqrt_price(record.sqrt_price_x96, venue.token0, venue.token1, invert=venue.base_token == 1)


def liquidity_decimal(record: SwapEventRecord, venue: VenueConfig) -> float:
    """Active liquidity in decimal-adjusted units, ``sqrt(x * y)``."""
    scale = (venue.token0.decimals + venue.token1.decimals) / 2.0
    return record.liquidity / 10.0**scale


def base_amount(record: SwapEventRecord, venue: VenueConfig) -> float:
    raw = record.amount0 if venue.base_token == 0 else record.amount1
    return raw / 10.0**venue.base.decimals


def quote_amount(record: SwapEventRecord, venue: VenueConfig) -> float:
    raw = record.amount1 if venue.base_token == 0 else record.amount0
    return raw / 10.0**venue.quote.decimals


def snapshot_pool(record: SwapEventRecord, venue: VenueConfig) -> Optional[CpmmPool]:
    """Pool implied by a swap's post-state: virtual reserves of the active liquidity.

    Exact for constant-product pools; for concentrated liquidity it is the
    current-tick approximation. ``None`` when the active liquidity is zero.
    """
    L = liquidity_decimal(record, venue)
    if L <= 0:
        return None
    return CpmmPool.from_price(
        quote_price(record, venue), L, fee=venue.fees, token_x=venue.base, token_y=venue.quote
    )


@dataclass(frozen=True)
class BlockSnapshot:
    """Pool state after the last swap of a block."""

    block_number: int
    timestamp_sec: int
    price: float
    pool: Optional[CpmmPool]
    liquidity: float
    tick: int
    volume: float  # sum of |quote amount| over the block's swaps
    swap_count: int


@dataclass(frozen=True)
class SwapDataset:
    venue: VenueConfig
    records: Tuple[SwapEventRecord, ...]
    snapshots: Dict[int, BlockSnapshot] = field(default_factory=dict)

    def __len__(self):
        return len(self.records)


def build_snapshots(records: Sequence[SwapEventRecord], venue: VenueConfig) -> Dict[int, BlockSnapshot]:
    snaps: Dict[int, BlockSnapshot] = {}
    i = 0
    n = len(records)
    while i < n:
        j = i
        block = records[i].block_number
        vol = []
        while j < n and records[j].block_number == block:
            vol.append(abs(quote_amount(records[j], venue)))
            j += 1
        last = records[j - 1]
        snaps[block] = BlockSnapshot(
            block_number=block,
            timestamp_sec=last.timestamp_sec,
            price=quote_price(last, venue),
            pool=snapshot_pool(last, venue),
            liquidity=liquidity_decimal(last, venue),
            tick=last.tick,
            volume=math.fsum(vol),
            swap_count=j - i,
        )
        i = j
    return snaps


# ---------------------------------------------------------------------------
# loading / writing


def _parse_int(value, name, line):
    try:
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, int):
            return value
        return int(str(value).strip())
    except (TypeError, ValueError):
        raise SchemaError(f"line {line}: {name} must be an integer, got {value!r}") from None


def _parse_opt_float(value, name, line):
    if value is None or value == "":
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"line {line}: {name} must be a number, got {value!r}") from None
    if not math.isfinite(v):
        raise SchemaError(f"line {line}: {name} must be finite")
    return v


def _record_from_row(row: dict, line: int) -> SwapEventRecord:
    rec = SwapEventRecord(
        block_number=_parse_int(row["block_number"], "block_number", line),
        timestamp_sec=_parse_int(row["timestamp_sec"], "timestamp_sec", line),
        tx_hash=str(row["tx_hash"]),
        log_index=_parse_int(row["log_index"], "log_index", line),
        amount0=_parse_int(row["amount0"], "amount0", line),
        amount1=_parse_int(row["amount1"], "amount1", line),
        sqrt_price_x96=_parse_int(row["sqrtPriceX96"], "sqrtPriceX96", line),
        liquidity=_parse_int(row["liquidity"], "liquidity", line),
        tick=_parse_int(row["tick"], "tick", line),
        l1_fee_usd=_parse_opt_float(row.get("l1_fee_usd"), "l1_fee_usd", line),
        l2_fee_usd=_parse_opt_float(row.get("l2_fee_usd"), "l2_fee_usd", line),
    )
    if rec.sqrt_price_x96 <= 0:
        raise SchemaError(f"line {line}: sqrtPriceX96 must be positive")
    if rec.liquidity < 0:
        raise SchemaError(f"line {line}: liquidity must be non-negative")
    return rec


def _detect_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
        return "jsonl" if fmt in ("json", "jsonl") else fmt
    return "jsonl" if path.suffix.lower() in (".jsonl", ".json", ".ndjson") else "csv"


def read_swap_records(path, fmt: Optional[str] = None) -> List[SwapEventRecord]:
    """Parse a swap file into records in file order (no sorting or checks)."""
    path = Path(path)
    fmt = _detect_format(path, fmt)
    rows = []
    if fmt == "csv":
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return []  # zero-byte file: same as header-only
            header = [h.strip() for h in header]
            missing = [c for c in SWAP_COLUMNS if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing required columns {missing}")
            if tuple(header[: len(SWAP_COLUMNS)]) != SWAP_COLUMNS:
                raise SchemaError(f"{path}: columns must start with {','.join(SWAP_COLUMNS)}")
            for lineno, values in enumerate(reader, start=2):
                if not values:
                    continue
                if len(values) != len(header):
                    raise SchemaError(f"line {lineno}: expected {len(header)} fields, got {len(values)}")
                rows.append((lineno, dict(zip(header, values))))
    elif fmt == "jsonl":
        with path.open() as fh:
            for lineno, text in enumerate(fh, start=1):
                if not text.strip():
                    continue
                try:
                    obj = json.loads(text)
                except json.JSONDecodeError as e:
                    raise SchemaError(f"line {lineno}: invalid JSON ({e.msg})") from None
                missing = [c for c in SWAP_COLUMNS if c not in obj]
                if missing:
                    raise SchemaError(f"line {lineno}: missing required fields {missing}")
                rows.append((lineno, obj))
    else:
        raise SchemaError(f"unsupported swap format {fmt!r}")
    return [_record_from_row(row, lineno) for lineno, row in rows]


def order_records(records: Sequence[SwapEventRecord]) -> List[SwapEventRecord]:
    """Sort by (block, log_index) and enforce uniqueness and timestamp consistency."""
    out = sorted(records, key=lambda r: r.key)
    for a, b in zip(out, out[1:]):
        if a.key == b.key:
            raise IntegrityError(f"duplicate swap at block {a.block_number} log {a.log_index}")
        if a.block_number == b.block_number and a.timestamp_sec != b.timestamp_sec:
            raise IntegrityError(f"block {a.block_number} has inconsistent timestamps")
        if b.timestamp_sec < a.timestamp_sec:
            raise IntegrityError(f"timestamp decreases at block {b.block_number}")
    return out


def load_swaps(path, venue: VenueConfig, fmt: Optional[str] = None) -> SwapDataset:
    """Load, order and snapshot a swap file for one venue."""
    records = order_records(read_swap_records(path, fmt))
    return SwapDataset(venue, tuple(records), build_snapshots(records, venue))


def _fmt_opt(v):
    return "" if v is None else repr(float(v))


def write_swaps(records: Sequence[SwapEventRecord], path, fmt: str = "csv", gas: Optional[bool] = None) -> Path:
    """Write records; gas columns are emitted when any record carries them."""
    path = Path(path)
    fmt = _detect_format(path, fmt)
    if gas is None:
        gas = any(r.l1_fee_usd is not None or r.l2_fee_usd is not None for r in records)
    cols = SWAP_COLUMNS + (GAS_COLUMNS if gas else ())
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in records:
                row = [r.block_number, r.timestamp_sec, r.tx_hash, r.log_index, r.amount0,
                       r.amount1, r.sqrt_price_x96, r.liquidity, r.tick]
                if gas:
                    row += [_fmt_opt(r.l1_fee_usd), _fmt_opt(r.l2_fee_usd)]
                w.writerow(row)
    else:
        with path.open("w") as fh:
            for r in records:
                obj = {
                    "block_number": r.block_number,
                    "timestamp_sec": r.timestamp_sec,
                    "tx_hash": r.tx_hash,
                    "log_index": r.log_index,
                    "amount0": r.amount0,
                    "amount1": r.amount1,
                    "sqrtPriceX96": r.sqrt_price_x96,
                    "liquidity": r.liquidity,
                    "tick": r.tick,
                }
                if gas:
                    obj["l1_fee_usd"] = r.l1_fee_usd
                    obj["l2_fee_usd"] = r.l2_fee_usd
                fh.write(json.dumps(obj) + "\n")
    return path


def load_cex(path) -> List[CexTick]:
    """Load per-second closes; timestamps must strictly increase."""
    path = Path(path)
    ticks: List[CexTick] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return ticks
        header = [h.strip() for h in header]
        if tuple(header) != CEX_COLUMNS:
            raise SchemaError(f"{path}: CEX header must be {','.join(CEX_COLUMNS)}")
        for lineno, values in enumerate(reader, start=2):
            if not values:
                continue
            if len(values) != 2:
                raise SchemaError(f"line {lineno}: expected 2 fields")
            ts = _parse_int(values[0], "timestamp_sec", lineno)
            close = _parse_opt_float(values[1], "close", lineno)
            if close is None or close <= 0:
                raise SchemaError(f"line {lineno}: close must be a positive number")
            if ticks and ts <= ticks[-1].timestamp_sec:
                raise IntegrityError(f"line {lineno}: timestamps must strictly increase")
            ticks.append(CexTick(ts, close))
    gaps = cex_gaps(ticks)
    if gaps:
        log.info("%s: %d gaps in CEX series", path, len(gaps))
    return ticks


def write_cex(ticks: Sequence[CexTick], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CEX_COLUMNS)
        for t in ticks:
            w.writerow([t.timestamp_sec, repr(float(t.close))])
    return path


def cex_gaps(ticks: Sequence[CexTick]) -> List[Tuple[int, int]]:
    """(last present second, next present second) for every missing stretch."""
    return [
        (a.timestamp_sec, b.timestamp_sec)
        for a, b in zip(ticks, ticks[1:])
        if b.timestamp_sec - a.timestamp_sec > 1
    ]


# ---------------------------------------------------------------------------
# block grid


@dataclass(frozen=True)
class BlockQuote:
    """One block on the analysis grid; ``snapshot`` is None when nothing traded."""

    block_number: int
    timestamp_sec: int
    snapshot: Optional[BlockSnapshot]

    @property
    def traded(self) -> bool:
        return self.snapshot is not None


def block_grid(dataset: SwapDataset, fill: bool = True) -> List[BlockQuote]:
    """Every block from the first to the last swap block.

    Blocks without swaps get timestamps extrapolated from the first swap
    block at the venue's block time, clamped between the neighbouring swap
    blocks' timestamps.
    """
    snaps = dataset.snapshots
    if not snaps:
        return []
    blocks = sorted(snaps)
    if not fill:
        return [BlockQuote(b, snaps[b].timestamp_sec, snaps[b]) for b in blocks]
    bt = dataset.venue.block_time_sec
    b0 = blocks[0]
    t0 = snaps[b0].timestamp_sec
    out = []
    for prev, nxt in zip(blocks, blocks[1:] + [None]):
        out.append(BlockQuote(prev, snaps[prev].timestamp_sec, snaps[prev]))
        if nxt is None:
            break
        lo, hi = snaps[prev].timestamp_sec, snaps[nxt].timestamp_sec
        for b in range(prev + 1, nxt):
            # small epsilon keeps exact multiples from flooring one second low
            ts = t0 + math.floor((b - b0) * bt + 1e-9)
            out.append(BlockQuote(b, min(max(ts, lo), hi), None))
    return out
