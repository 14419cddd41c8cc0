"""Pool state, spot-price decoding and swap math for CPMM and CLMM pools.

All prices are quote token per base token (USDC per WETH style). Pool math
runs in float64; ``sqrtPriceX96`` decoding is done with exact rationals and
rounded once at the end.
"""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Tuple, Union

from .errors import (
    InvalidInputError,
    InvalidPriceError,
    PartialFillError,
    ReserveDepletionError,
)

Q96 = 2**96
TICK_BASE = 1.0001
MAX_DECIMALS = 30


class Side(enum.Enum):
    """Which way base token moves relative to the pool."""

    BUY_BASE = "buy_base"  # base leaves the pool, price rises
    SELL_BASE = "sell_base"  # base enters the pool, price falls


@dataclass(frozen=True)
class TokenMeta:
    symbol: str
    decimals: int
    bridged: bool = False

    def __post_init__(self):
        if not 0 <= self.decimals <= MAX_DECIMALS:
            raise InvalidInputError(
                f"decimals must be in [0, {MAX_DECIMALS}], got {self.decimals}"
            )


@dataclass(frozen=True)
class FeeParams:
    """LP fee ``lp_fee``, CEX taker fee ``cex_fee`` and a flat gas cost in quote."""

    lp_fee: float = 0.0
    cex_fee: float = 0.0
    gas_fee: float = 0.0

    def __post_init__(self):
        for name in ("lp_fee", "cex_fee"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise InvalidInputError(f"{name} must be in [0, 1), got {v}")
        if not (self.gas_fee >= 0.0 and math.isfinite(self.gas_fee)):
            raise InvalidInputError(f"gas_fee must be >= 0, got {self.gas_fee}")

    @property
    def wedge(self) -> float:
        """Combined fee multiplier ``(1 - f)(1 - g)``."""
        return (1.0 - self.lp_fee) * (1.0 - self.cex_fee)


@dataclass(frozen=True)
class CpmmPool:
    reserve_x: float
    reserve_y: float
    fee: FeeParams = FeeParams()
    token_x: Optional[TokenMeta] = None
    token_y: Optional[TokenMeta] = None

    def __post_init__(self):
        for name in ("reserve_x", "reserve_y"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def from_price(cls, price, liquidity, **kwargs) -> "CpmmPool":
        """Pool with virtual reserves ``L / sqrt(P)`` and ``L * sqrt(P)``."""
        if not (price > 0 and math.isfinite(price)):
            raise InvalidPriceError(f"price must be positive, got {price}")
        s = math.sqrt(price)
        return cls(liquidity / s, liquidity * s, **kwargs)

    @property
    def spot_price(self) -> float:
        return self.reserve_y / self.reserve_x

    @property
    def invariant(self) -> float:
        return self.reserve_x * self.reserve_y

    @property
    def liquidity(self) -> float:
        return math.sqrt(self.reserve_x) * math.sqrt(self.reserve_y)

    def scaled(self, k: float) -> "CpmmPool":
        return replace(self, reserve_x=self.reserve_x * k, reserve_y=self.reserve_y * k)


@dataclass(frozen=True)
class SpotQuote:
    price: float
    block_number: int = 0
    timestamp_sec: int = 0

    def __post_init__(self):
        if not (self.price > 0 and math.isfinite(self.price)):
            raise InvalidPriceError(f"quote price must be positive, got {self.price}")


# ---------------------------------------------------------------------------
# sqrtPriceX96 decoding


def decode_sqrt_price_exact(sqrt_price_x96: int, token0: TokenMeta, token1: TokenMeta) -> Fraction:
    """Exact token1-per-token0 price encoded by a Q64.96 square root."""
    if sqrt_price_x96 <= 0:
        raise InvalidPriceError("sqrtPriceX96 must be positive")
    num = sqrt_price_x96 * sqrt_price_x96
    den = 1 << 192
    shift = token0.decimals - token1.decimals
    if shift >= 0:
        num *= 10**shift
    else:
        den *= 10 ** (-shift)
    return Fraction(num, den)


def decode_sqrt_price(sqrt_price_x96: int, token0: TokenMeta, token1: TokenMeta, invert: bool = False) -> float:
    """Decimal-adjusted price of token0 in units of token1.

    ``invert=True`` returns token0 per token1 instead, which is what a pool
    whose base asset is token1 needs. The exact rational is rounded once
    (round-half-even) to float64.
    """
    exact = decode_sqrt_price_exact(sqrt_price_x96, token0, token1)
    if invert:
        exact = 1 / exact
    return float(exact)


def encode_sqrt_price(price, token0: TokenMeta, token1: TokenMeta) -> int:
    """Inverse of :func:`decode_sqrt_price` (floor of the exact root)."""
    p = Fraction(price)
    if p <= 0:
        raise InvalidPriceError("price must be positive")
    shift = token1.decimals - token0.decimals
    raw = p * (Fraction(10) ** shift)
    scaled = raw * (1 << 192)
    return math.isqrt(scaled.numerator // scaled.denominator)


def as_decimal(value: Fraction, digits: int = 40) -> Decimal:
    """Round an exact rational to ``digits`` significant digits, half-even."""
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = ROUND_HALF_EVEN
        return Decimal(value.numerator) / Decimal(value.denominator)


def tick_to_price(tick: float) -> float:
    return TICK_BASE**tick


def tick_to_sqrt_price(tick: float) -> float:
    return TICK_BASE ** (tick / 2.0)


def price_to_tick(price: float) -> int:
    """Largest tick whose price is <= ``price``."""
    if not price > 0:
        raise InvalidPriceError("price must be positive")
    t = math.floor(math.log(price) / math.log(TICK_BASE))
    # log rounding can land one tick off either way
    if tick_to_price(t) > price:
        t -= 1
    elif tick_to_price(t + 1) <= price:
        t += 1
    return t


# ---------------------------------------------------------------------------
# CPMM


def _check_amount(dx):
    if not (dx >= 0 and math.isfinite(dx)):
        raise InvalidInputError(f"trade amount must be finite and >= 0, got {dx}")


def cpmm_swap(pool: CpmmPool, dx: float, side: Side = Side.BUY_BASE, fee_exclusive: bool = True) -> Tuple[float, CpmmPool]:
    """Trade ``dx`` base against a constant-product pool.

    Returns the quote amount paid (``BUY_BASE``) or received (``SELL_BASE``)
    and the post-trade pool. With ``fee_exclusive`` the reserves move by the
    raw amounts so ``x * y`` is conserved and any LP fee is settled by the
    caller. Otherwise the LP fee is taken from the input token before the
    invariant update and retained in the reserves.
    """
    _check_amount(dx)
    x, y = pool.reserve_x, pool.reserve_y
    if dx == 0:
        return 0.0, pool
    f = 0.0 if fee_exclusive else pool.fee.lp_fee
    if side is Side.BUY_BASE:
        if dx >= x:
            raise ReserveDepletionError(f"cannot take {dx} base from a pool holding {x}")
        dy_net = y * dx / (x - dx)
        dy_in = dy_net / (1.0 - f)
        return dy_in, replace(pool, reserve_x=x - dx, reserve_y=y + dy_in)
    dx_net = dx * (1.0 - f)
    dy = y * dx_net / (x + dx_net)
    return dy, replace(pool, reserve_x=x + dx, reserve_y=y - dy)


def cpmm_price_impact(pool: CpmmPool, dx: float, side: Side = Side.BUY_BASE) -> float:
    """Relative quote-reserve change ``dy / y`` caused by trading ``dx`` base.

    For purchases this is ``dx / (x - dx)``, from ``1 + dy/y = 1/(1 - dx/x)``.
    """
    _check_amount(dx)
    x = pool.reserve_x
    if side is Side.BUY_BASE:
        if dx >= x:
            raise ReserveDepletionError(f"cannot take {dx} base from a pool holding {x}")
        return dx / (x - dx)
    return dx / (x + dx)


# ---------------------------------------------------------------------------
# CLMM


@dataclass(frozen=True)
class TickRange:
    """Constant liquidity between two initialized ticks."""

    lower_tick: int
    upper_tick: int
    liquidity: float

    def __post_init__(self):
        if self.upper_tick <= self.lower_tick:
            raise InvalidInputError("upper_tick must exceed lower_tick")
        if not (self.liquidity >= 0 and math.isfinite(self.liquidity)):
            raise InvalidInputError("liquidity must be finite and >= 0")

    @property
    def price_lower(self) -> float:
        return tick_to_price(self.lower_tick)

    @property
    def price_upper(self) -> float:
        return tick_to_price(self.upper_tick)

    @property
    def sqrt_lower(self) -> float:
        return tick_to_sqrt_price(self.lower_tick)

    @property
    def sqrt_upper(self) -> float:
        return tick_to_sqrt_price(self.upper_tick)

    def real_reserves(self, sqrt_price: float) -> Tuple[float, float]:
        """Token amounts held by the range when the pool sits at ``sqrt_price``."""
        s = min(max(sqrt_price, self.sqrt_lower), self.sqrt_upper)
        L = self.liquidity
        return L * (1.0 / s - 1.0 / self.sqrt_upper), L * (s - self.sqrt_lower)


@dataclass(frozen=True)
class ClmmPool:
    """Concentrated-liquidity pool as contiguous ranges plus a current price.

    Gaps without liquidity are represented by ranges with zero liquidity, so
    ``ranges[i].upper_tick == ranges[i + 1].lower_tick`` always holds. Tick
    prices are in the same quote-per-base units as every other price here.
    """

    ranges: Tuple[TickRange, ...]
    sqrt_price: float
    fee: FeeParams = FeeParams()
    token_x: Optional[TokenMeta] = None
    token_y: Optional[TokenMeta] = None

    def __post_init__(self):
        ranges = tuple(self.ranges)
        object.__setattr__(self, "ranges", ranges)
        if not ranges:
            raise InvalidInputError("a CLMM pool needs at least one tick range")
        for a, b in zip(ranges, ranges[1:]):
            if a.upper_tick != b.lower_tick:
                raise InvalidInputError("tick ranges must be contiguous and increasing")
        s = self.sqrt_price
        if not (s > 0 and math.isfinite(s)):
            raise InvalidPriceError("sqrt_price must be positive")
        if not (ranges[0].sqrt_lower <= s <= ranges[-1].sqrt_upper):
            raise InvalidInputError("sqrt_price lies outside the initialized ticks")
        object.__setattr__(self, "_lowers", tuple(r.sqrt_lower for r in ranges))

    @classmethod
    def from_liquidity_net(cls, liquidity_net: Mapping[int, float], sqrt_price: float, **kwargs) -> "ClmmPool":
        """Build ranges from a tick -> liquidityNet map as emitted by mint/burn logs."""
        ticks = sorted(liquidity_net)
        if len(ticks) < 2:
            raise InvalidInputError("need at least two initialized ticks")
        ranges = []
        active = 0.0
        for lo, hi in zip(ticks, ticks[1:]):
            active += liquidity_net[lo]
            if active < -1e-9 * max(1.0, abs(liquidity_net[lo])):
                raise InvalidInputError(f"negative active liquidity at tick {lo}")
            ranges.append(TickRange(lo, hi, max(active, 0.0)))
        active += liquidity_net[ticks[-1]]
        if abs(active) > 1e-9 * max(1.0, max(abs(v) for v in liquidity_net.values())):
            raise InvalidInputError("liquidityNet does not sum to zero")
        return cls(tuple(ranges), sqrt_price, **kwargs)

    @property
    def current_index(self) -> int:
        i = bisect.bisect_right(self._lowers, self.sqrt_price) - 1
        return min(max(i, 0), len(self.ranges) - 1)

    @property
    def current_range(self) -> TickRange:
        return self.ranges[self.current_index]

    @property
    def current_tick(self) -> int:
        return price_to_tick(self.spot_price)

    @property
    def liquidity(self) -> float:
        """Active liquidity at the current price."""
        return self.current_range.liquidity

    @property
    def spot_price(self) -> float:
        return self.sqrt_price * self.sqrt_price

    def virtual_reserves(self) -> Tuple[float, float]:
        L = self.liquidity
        return L / self.sqrt_price, L * self.sqrt_price

    def capacity(self, side: Side) -> float:
        """Largest base amount that can be traded in direction ``side``."""
        s, i = self.sqrt_price, self.current_index
        total = 0.0
        if side is Side.BUY_BASE:
            for r in self.ranges[i:]:
                lo = max(s, r.sqrt_lower)
                total += r.liquidity * (1.0 / lo - 1.0 / r.sqrt_upper)
        else:
            for r in self.ranges[: i + 1]:
                hi = min(s, r.sqrt_upper)
                total += r.liquidity * (1.0 / r.sqrt_lower - 1.0 / hi)
        return total


def equivalent_reserves(x_i: float, y_i: float, alpha: float) -> Tuple[float, float]:
    """CPMM reserves whose curve matches a range ``[P / alpha, P * alpha]``.

    ``x_i, y_i`` are the real reserves the range holds at its centre price P.
    """
    if not alpha > 1:
        raise InvalidInputError("alpha must exceed 1")
    k = 1.0 - 1.0 / math.sqrt(alpha)
    return x_i / k, y_i / k


def clmm_swap(pool: ClmmPool, dx: float, side: Side = Side.BUY_BASE) -> Tuple[float, ClmmPool]:
    """Trade ``dx`` base against a concentrated-liquidity pool, tick by tick.

    Inside each range the pool is a CPMM on the virtual reserves
    ``(L / s, L * s)``; once the range's real reserve is used up the walk
    crosses into the neighbouring range. Fees are not applied (the reserves
    move by the raw amounts). Raises :class:`PartialFillError` when
    liquidity runs out.
    """
    _check_amount(dx)
    if dx == 0:
        return 0.0, pool
    ranges = pool.ranges
    s = pool.sqrt_price
    i = pool.current_index
    remaining = dx
    out = []
    if side is Side.BUY_BASE:
        while remaining > 0:
            if i >= len(ranges):
                break
            r = ranges[i]
            L, sb = r.liquidity, r.sqrt_upper
            if L > 0:
                X, Y = L / s, L * s
                avail = X - L / sb
                if remaining <= avail:
                    out.append(Y * remaining / (X - remaining))
                    s = min(L / (X - remaining), sb)
                    remaining = 0.0
                    break
                out.append(L * sb - Y)
                remaining -= avail
            s = sb
            i += 1
    else:
        while remaining > 0:
            if i < 0:
                break
            r = ranges[i]
            L, sa = r.liquidity, r.sqrt_lower
            if L > 0:
                X, Y = L / s, L * s
                avail = L / sa - X
                if remaining <= avail:
                    out.append(Y * remaining / (X + remaining))
                    s = max(L / (X + remaining), sa)
                    remaining = 0.0
                    break
                out.append(Y - L * sa)
                remaining -= avail
            s = sa
            i -= 1
    amount_out = math.fsum(out)
    new_pool = replace(pool, sqrt_price=s)
    if remaining > 0:
        raise PartialFillError(
            f"liquidity exhausted after {dx - remaining} of {dx} base",
            filled=dx - remaining,
            amount_out=amount_out,
            pool=new_pool,
        )
    return amount_out, new_pool


Pool = Union[CpmmPool, ClmmPool]


def pool_swap(pool: Pool, dx: float, side: Side = Side.BUY_BASE) -> Tuple[float, Pool]:
    """Fee-exclusive swap on either pool kind."""
    if isinstance(pool, ClmmPool):
        return clmm_swap(pool, dx, side)
    return cpmm_swap(pool, dx, side, fee_exclusive=True)


def pool_capacity(pool: Pool, side: Side) -> float:
    if isinstance(pool, ClmmPool):
        return pool.capacity(side)
    return pool.reserve_x if side is Side.BUY_BASE else math.inf


def clmm_from_ranges(bounds: Sequence[int], liquidities: Sequence[float], price: float, **kwargs) -> ClmmPool:
    """Convenience constructor: ``bounds`` are n+1 ticks for n liquidities."""
    if len(bounds) != len(liquidities) + 1:
        raise InvalidInputError("need one more tick bound than liquidity values")
    ranges = tuple(TickRange(lo, hi, L) for lo, hi, L in zip(bounds, bounds[1:], liquidities))
    return ClmmPool(ranges, math.sqrt(price), **kwargs)
