"""How big is the arbitrage against a CEX as the price gap grows?

Sweeps the relative gap between a 1000 WETH / 2M USDC pool and the CEX,
prints the closed-form optimal trade and MAV next to the golden-section
search over the simulated profit, and shows the fee wedge where MAV is 0.
"""
import numpy as np

from mavlab import CpmmPool, FeeParams, cpmm_cex_mav, numeric_cex_mav

pool = CpmmPool(1000.0, 2_000_000.0)  # spot 2000 USDC/WETH
fees = FeeParams(lp_fee=0.003, cex_fee=0.001)
print(f"pool spot {pool.spot_price:.2f}, no-arbitrage band is +-{(1 - fees.wedge) * 1e4:.1f} bps around it")

print(f"{'gap bps':>8} {'direction':>24} {'dx_max':>10} {'MAV':>12} {'search MAV':>12}")
for gap_bps in [-200, -50, -30, -10, 0, 10, 30, 40, 50, 100, 500]:
    p_cex = pool.spot_price * (1 + gap_bps / 1e4)
    opp = cpmm_cex_mav(pool, p_cex, fees)
    _, mav = numeric_cex_mav(pool, p_cex, fees)
    print(f"{gap_bps:8d} {opp.direction.value:>24} {opp.dx_max:10.4f} {opp.mav:12.4f} {mav:12.4f}")

# MAV grows roughly quadratically in the gap once outside the wedge
gaps = np.linspace(0.005, 0.05, 10)
mavs = np.array([cpmm_cex_mav(pool, pool.spot_price * (1 + g), fees).mav for g in gaps])
slope = np.polyfit(np.log(gaps - (1 - fees.wedge)), np.log(mavs), 1)[0]
print(f"log-log slope of MAV vs (gap - wedge): {slope:.2f}")
