"""Optimal arbitrage trade size and Maximal Arbitrage Value (MAV).

Covers AMM-vs-CEX for constant-product and concentrated-liquidity pools,
AMM-vs-AMM, and the success-probability-weighted payoff. Profit is quoted in
the quote token; trade sizes are in the base token.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .amm import (
    ClmmPool,
    CpmmPool,
    FeeParams,
    Pool,
    Side,
    cpmm_swap,
    pool_capacity,
    pool_swap,
)
from .errors import InvalidInputError, InvalidPriceError, ModelContractError
from .optimize import expand_bracket, numeric_mav


class Direction(enum.Enum):
    NONE = "none"
    BUY_AMM_SELL_CEX = "buy_at_amm_sell_at_cex"
    BUY_CEX_SELL_AMM = "buy_at_cex_sell_at_amm"
    BUY_A_SELL_B = "buy_at_pool_a_sell_at_pool_b"
    BUY_B_SELL_A = "buy_at_pool_b_sell_at_pool_a"


@dataclass(frozen=True)
class ArbOpportunity:
    """Best single arbitrage trade against one AMM state.

    ``dx_max`` is the base amount bought on the cheap venue. ``epsilon`` is
    the signed gap with ``P_ref = P_amm * (1 + epsilon)``, where the
    reference is the CEX (or pool B). ``pool_base_delta`` is the signed base
    change of the AMM pool (of pool A for two-pool trades) when the trade
    executes.
    """

    direction: Direction
    dx_max: float
    mav: float
    post_trade_amm_price: float
    epsilon: float
    pool_base_delta: float = 0.0
    post_trade_price_b: Optional[float] = None

    def __post_init__(self):
        if self.mav < 0 or self.dx_max < 0:
            raise InvalidInputError("mav and dx_max must be non-negative")
        if (self.mav == 0) != (self.dx_max == 0):
            raise InvalidInputError("dx_max and mav must be zero together")

    @property
    def exists(self) -> bool:
        return self.mav > 0


def _no_arb(price, epsilon, price_b=None):
    return ArbOpportunity(Direction.NONE, 0.0, 0.0, price, epsilon, 0.0, price_b)


def _fees(pool, fees):
    if fees is not None:
        return fees
    return getattr(pool, "fee", None) or FeeParams()


def _check_price(p):
    if not (p > 0 and math.isfinite(p)):
        raise InvalidPriceError(f"price must be positive and finite, got {p}")


def cpmm_cex_mav(pool: CpmmPool, p_cex: float, fees: Optional[FeeParams] = None) -> ArbOpportunity:
    """Closed-form optimal trade and MAV between a CPMM and a CEX.

    When ``P_amm < P_cex`` the arbitrageur buys ``dx`` base on the AMM,
    receives ``dx (1 - f)`` and sells it on the CEX, giving

        dx_max = x (1 - sqrt(P_amm / ((1-f)(1-g) P_cex)))
        MAV    = x (1-f) (sqrt((1-g) P_cex) - sqrt(P_amm / (1-f)))^2

    and the pool ends at ``(1-f)(1-g) P_cex``. The reverse case buys ``dx``
    on the CEX and sells ``dx (1 - g)`` into the pool, ending at
    ``P_cex / ((1-f)(1-g))``. Inside the fee wedge the result is zero.
    ``fees`` defaults to ``pool.fee``; gas is not netted here.
    """
    _check_price(p_cex)
    fees = _fees(pool, fees)
    f, g = fees.lp_fee, fees.cex_fee
    w = fees.wedge
    x, p = pool.reserve_x, pool.spot_price
    eps = p_cex / p - 1.0
    c = w * p_cex  # marginal CEX proceeds per base bought on the AMM
    if c > p:
        # 1 - sqrt(p/c) written without cancellation
        dx = x * ((c - p) / c) / (1.0 + math.sqrt(p / c))
        a, b = (1.0 - g) * p_cex, p / (1.0 - f)
        mav = x * (1.0 - f) * ((a - b) / (math.sqrt(a) + math.sqrt(b))) ** 2
        if dx <= 0 or mav <= 0:
            return _no_arb(p, eps)
        return ArbOpportunity(Direction.BUY_AMM_SELL_CEX, dx, mav, c, eps, -dx)
    q = p_cex / w  # marginal AMM price at which selling stops paying
    if p > q:
        r = p / q
        dx = x / (1.0 - g) * (r - 1.0) / (math.sqrt(r) + 1.0)
        a, b = (1.0 - f) * p, p_cex / (1.0 - g)
        mav = x * ((a - b) / (math.sqrt(a) + math.sqrt(b))) ** 2
        if dx <= 0 or mav <= 0:
            return _no_arb(p, eps)
        return ArbOpportunity(Direction.BUY_CEX_SELL_AMM, dx, mav, q, eps, dx * (1.0 - g))
    return _no_arb(p, eps)


def cpmm_cpmm_mav(pool_a: CpmmPool, pool_b: CpmmPool) -> ArbOpportunity:
    """Fee-free price-equalising arbitrage between two CPMMs.

    Buys ``dx`` on the cheaper pool and sells it on the dearer one with

        dx = x_cheap x_dear (sqrt(P_dear) - sqrt(P_cheap))
             / (sqrt(P_dear) x_dear + sqrt(P_cheap) x_cheap)

    which leaves both pools at the same spot price. Fee-aware cases go
    through :func:`amm_amm_mav_numeric`.
    """
    pa, pb = pool_a.spot_price, pool_b.spot_price
    eps = pb / pa - 1.0
    if pa == pb:
        return _no_arb(pa, eps, pb)
    if pa < pb:
        cheap, dear, direction = pool_a, pool_b, Direction.BUY_A_SELL_B
    else:
        cheap, dear, direction = pool_b, pool_a, Direction.BUY_B_SELL_A
    xc, xd = cheap.reserve_x, dear.reserve_x
    rc, rd = math.sqrt(cheap.spot_price), math.sqrt(dear.spot_price)
    dx = xc * xd * (rd - rc) / (rd * xd + rc * xc)
    paid, cheap_after = cpmm_swap(cheap, dx, Side.BUY_BASE)
    got, dear_after = cpmm_swap(dear, dx, Side.SELL_BASE)
    mav = got - paid
    if dx <= 0 or mav <= 0:
        return _no_arb(pa, eps, pb)
    if direction is Direction.BUY_A_SELL_B:
        return ArbOpportunity(direction, dx, mav, cheap_after.spot_price, eps, -dx, dear_after.spot_price)
    return ArbOpportunity(direction, dx, mav, dear_after.spot_price, eps, dx, cheap_after.spot_price)


# ---------------------------------------------------------------------------
# simulated profit functions (numeric route)


def simulated_profit(pool: Pool, p_cex: float, fees: FeeParams, direction: Direction) -> Callable[[float], float]:
    """Profit of trading ``dx`` against ``pool`` and offsetting on the CEX.

    Built from the swap routines only, so it is independent of the closed
    forms it is used to check.
    """
    w = fees.wedge
    f, g = fees.lp_fee, fees.cex_fee
    if direction is Direction.BUY_AMM_SELL_CEX:
        def profit(dx):
            paid, _ = pool_swap(pool, dx, Side.BUY_BASE)
            return dx * w * p_cex - paid
    elif direction is Direction.BUY_CEX_SELL_AMM:
        def profit(dx):
            got, _ = pool_swap(pool, dx * (1.0 - g), Side.SELL_BASE)
            return (1.0 - f) * got - dx * p_cex
    else:
        raise InvalidInputError(f"not an AMM-vs-CEX direction: {direction}")
    return profit


def cex_direction(price: float, p_cex: float) -> Direction:
    if price < p_cex:
        return Direction.BUY_AMM_SELL_CEX
    if price > p_cex:
        return Direction.BUY_CEX_SELL_AMM
    return Direction.NONE


def _trade_bracket(pool, profit, side, fees):
    cap = pool_capacity(pool, side)
    if side is Side.SELL_BASE:
        cap = cap / (1.0 - fees.cex_fee)
    if math.isinf(cap):
        start = getattr(pool, "reserve_x", None) or 1.0
        return expand_bracket(profit, start)
    # stay strictly inside a CPMM's reserve, where the swap is defined
    return cap * (1.0 - 1e-15) if isinstance(pool, CpmmPool) else cap


def numeric_cex_mav(pool: Pool, p_cex: float, fees: Optional[FeeParams] = None, rtol: float = 1e-10) -> Tuple[float, float]:
    """Golden-section optimum of the simulated AMM-vs-CEX profit.

    Returns ``(dx_max, mav)``; ``(0, 0)`` when no trade is profitable.
    """
    _check_price(p_cex)
    fees = _fees(pool, fees)
    direction = cex_direction(pool.spot_price, p_cex)
    if direction is Direction.NONE:
        return 0.0, 0.0
    profit = simulated_profit(pool, p_cex, fees, direction)
    side = Side.BUY_BASE if direction is Direction.BUY_AMM_SELL_CEX else Side.SELL_BASE
    hi = _trade_bracket(pool, profit, side, fees)
    dx, mav = numeric_mav(profit, (0.0, hi), rtol)
    if mav <= 0:
        return 0.0, 0.0
    return dx, mav


def two_pool_profit(pool_a: Pool, pool_b: Pool, fees_a: Optional[FeeParams] = None, fees_b: Optional[FeeParams] = None):
    """Profit of buying ``dx`` on the cheaper pool and selling on the dearer.

    The buy leg delivers ``dx (1 - f_cheap)`` base, which is sold into the
    dearer pool; its quote output is reduced by ``f_dear``. Returns
    ``(profit_fn, cheap_is_a)``.
    """
    fa, fb = _fees(pool_a, fees_a), _fees(pool_b, fees_b)
    cheap_is_a = pool_a.spot_price <= pool_b.spot_price
    cheap, dear = (pool_a, pool_b) if cheap_is_a else (pool_b, pool_a)
    fc, fd = (fa, fb) if cheap_is_a else (fb, fa)

    def profit(dx):
        paid, _ = pool_swap(cheap, dx, Side.BUY_BASE)
        got, _ = pool_swap(dear, dx * (1.0 - fc.lp_fee), Side.SELL_BASE)
        return got * (1.0 - fd.lp_fee) - paid

    return profit, cheap_is_a


def amm_amm_mav_numeric(pool_a: Pool, pool_b: Pool, fees_a: Optional[FeeParams] = None, fees_b: Optional[FeeParams] = None, rtol: float = 1e-10) -> ArbOpportunity:
    """Fee-aware two-pool arbitrage for any pool kinds, via golden section."""
    pa, pb = pool_a.spot_price, pool_b.spot_price
    eps = pb / pa - 1.0
    if pa == pb:
        return _no_arb(pa, eps, pb)
    profit, cheap_is_a = two_pool_profit(pool_a, pool_b, fees_a, fees_b)
    cheap, dear = (pool_a, pool_b) if cheap_is_a else (pool_b, pool_a)
    f_cheap = _fees(cheap, fees_a if cheap_is_a else fees_b).lp_fee
    cap = pool_capacity(cheap, Side.BUY_BASE)
    cap_dear = pool_capacity(dear, Side.SELL_BASE) / (1.0 - f_cheap)
    hi = min(cap, cap_dear)
    if isinstance(cheap, CpmmPool):
        hi = min(hi, cheap.reserve_x * (1.0 - 1e-15))
    dx, mav = numeric_mav(profit, (0.0, hi), rtol)
    if dx <= 0 or mav <= 0:
        return _no_arb(pa, eps, pb)
    _, cheap_after = pool_swap(cheap, dx, Side.BUY_BASE)
    _, dear_after = pool_swap(dear, dx * (1.0 - f_cheap), Side.SELL_BASE)
    if cheap_is_a:
        return ArbOpportunity(Direction.BUY_A_SELL_B, dx, mav, cheap_after.spot_price, eps, -dx, dear_after.spot_price)
    return ArbOpportunity(Direction.BUY_B_SELL_A, dx, mav, dear_after.spot_price, eps, dx * (1.0 - f_cheap), cheap_after.spot_price)


def amm_amm_mav(pool_a: Pool, pool_b: Pool) -> ArbOpportunity:
    """Fee-free two-pool MAV: closed form for CPMM pairs, numeric otherwise."""
    if isinstance(pool_a, CpmmPool) and isinstance(pool_b, CpmmPool):
        return cpmm_cpmm_mav(pool_a, pool_b)
    zero = FeeParams()
    return amm_amm_mav_numeric(pool_a, pool_b, zero, zero)


# ---------------------------------------------------------------------------
# concentrated liquidity


@dataclass(frozen=True)
class TickContribution:
    """Profit collected while the price crosses one tick range."""

    lower_tick: int
    upper_tick: int
    dx: float  # base bought on the cheap venue inside this range
    dy: float  # quote exchanged with the pool inside this range
    mav: float
    capped: bool  # the range's reserve was used up


@dataclass(frozen=True)
class ClmmArbResult:
    opportunity: ArbOpportunity
    ticks: Tuple[TickContribution, ...]
    exhausted: bool


def clmm_cex_mav(pool: ClmmPool, p_cex: float, fees: Optional[FeeParams] = None) -> ClmmArbResult:
    """MAV between a concentrated-liquidity pool and a CEX by walking ticks.

    Starting from the current price the walk moves toward the fee-adjusted
    alignment price. In each range the optimum is the CPMM one on the
    range's virtual reserves, capped by the real reserve left in the range;
    a capped range hands over to its neighbour. The per-range profits are
    summed. ``exhausted`` is set when liquidity ends before alignment.
    """
    _check_price(p_cex)
    fees = _fees(pool, fees)
    f, g = fees.lp_fee, fees.cex_fee
    w = fees.wedge
    p = pool.spot_price
    eps = p_cex / p - 1.0
    ranges = pool.ranges
    s = pool.sqrt_price
    i = pool.current_index
    parts = []
    exhausted = False

    if w * p_cex > p:
        c = w * p_cex
        target = math.sqrt(c)
        while s < target:
            if i >= len(ranges):
                exhausted = True
                break
            r = ranges[i]
            sb = r.sqrt_upper
            s_end = min(sb, target)
            L = r.liquidity
            if L > 0 and s_end > s:
                dx = L * (1.0 / s - 1.0 / s_end)
                dy = L * (s_end - s)
                parts.append(TickContribution(r.lower_tick, r.upper_tick, dx, dy, c * dx - dy, s_end == sb))
            s = s_end
            if s_end == sb:
                i += 1
        direction = Direction.BUY_AMM_SELL_CEX
    elif w * p > p_cex:
        q = p_cex / w
        target = math.sqrt(q)
        while s > target:
            if i < 0:
                exhausted = True
                break
            r = ranges[i]
            sa = r.sqrt_lower
            s_end = max(sa, target)
            L = r.liquidity
            if L > 0 and s_end < s:
                u = L * (1.0 / s_end - 1.0 / s)
                dy = L * (s - s_end)
                dx = u / (1.0 - g)
                parts.append(TickContribution(r.lower_tick, r.upper_tick, dx, dy, (1.0 - f) * dy - dx * p_cex, s_end == sa))
            s = s_end
            if s_end == sa:
                i -= 1
        direction = Direction.BUY_CEX_SELL_AMM
    else:
        return ClmmArbResult(_no_arb(p, eps), (), False)

    if not parts:
        return ClmmArbResult(_no_arb(p, eps), (), exhausted)
    dx_max = math.fsum(t.dx for t in parts)
    mav = math.fsum(t.mav for t in parts)
    if dx_max <= 0 or mav <= 0:
        return ClmmArbResult(_no_arb(p, eps), tuple(parts), exhausted)
    delta = -dx_max if direction is Direction.BUY_AMM_SELL_CEX else dx_max * (1.0 - g)
    opp = ArbOpportunity(direction, dx_max, mav, s * s, eps, delta)
    return ClmmArbResult(opp, tuple(parts), exhausted)


def pool_cex_mav(pool: Optional[Pool], p_cex: float, fees: Optional[FeeParams] = None) -> ArbOpportunity:
    """MAV against a CEX for either pool kind; ``None`` pools give zero."""
    if pool is None:
        return _no_arb(p_cex, 0.0)
    if isinstance(pool, ClmmPool):
        return clmm_cex_mav(pool, p_cex, fees).opportunity
    return cpmm_cex_mav(pool, p_cex, fees)


# ---------------------------------------------------------------------------
# success-weighted payoff

SuccessModel = Callable[[float, float], float]


def constant_success(probability: float = 1.0) -> SuccessModel:
    def model(dx, eps):
        return probability

    return model


@dataclass(frozen=True)
class PayoffResult:
    expected_payoff: float
    mav: float
    probability: float
    gas: float

    @property
    def profitable(self) -> bool:
        return self.expected_payoff > 0


def expected_payoff(opp: ArbOpportunity, model: Optional[SuccessModel] = None, gas: float = 0.0) -> PayoffResult:
    """Payoff ``MAV * P(dx_max, epsilon) - gas``; may be negative."""
    prob = 1.0 if model is None else model(opp.dx_max, opp.epsilon)
    if not (0.0 <= prob <= 1.0):
        raise ModelContractError(f"success probability {prob} outside [0, 1]")
    return PayoffResult(opp.mav * prob - gas, opp.mav, prob, gas)
