"""Walking a concentrated-liquidity pool toward the CEX price.

Liquidity sits in four tick ranges. The arbitrage pushes the price across
two boundaries; each range contributes its own MAV_i and the sum matches a
brute-force search over the whole-pool trade size.
"""
from mavlab import FeeParams, clmm_cex_mav, clmm_from_ranges
from mavlab.amm import tick_to_price
from mavlab.arbitrage import numeric_cex_mav

fees = FeeParams(0.0005, 0.0)
bounds = [-3000, -1000, 500, 2000, 4000]
pool = clmm_from_ranges(bounds, [400.0, 1500.0, 900.0, 200.0], tick_to_price(-200), fee=fees)
p_cex = tick_to_price(2600)
print(f"pool price {pool.spot_price:.4f}, CEX {p_cex:.4f}")

res = clmm_cex_mav(pool, p_cex, fees)
for t in res.ticks:
    print(f"  ticks [{t.lower_tick:6d}, {t.upper_tick:6d}): dx {t.dx:9.4f}  MAV_i {t.mav:8.4f}  {'crossed' if t.capped else 'stopped inside'}")
print(f"sum of MAV_i      {res.opportunity.mav:.10f}")
print(f"whole-pool search {numeric_cex_mav(pool, p_cex, fees)[1]:.10f}")
