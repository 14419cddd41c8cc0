"""Where does a swapper's money go? Gas, LP fee, block slippage, impact.

Decomposes every swap of a simulated log and prints the mean cost table
split at a cutoff timestamp, the way fee regimes before and after a
protocol change would be compared.
"""
from mavlab import SimSpec, VenueConfig, cost_table, decompose_dataset, simulate_market
from mavlab.ingest import SwapDataset, build_snapshots

venue = VenueConfig("arb-weth-usdc", "arbitrum", lp_fee=0.0005)
res = simulate_market(SimSpec(seed=3, duration_sec=900, noise_intensity=2.0, gas_l1_usd=0.04, gas_l2_usd=0.01), venue)
data = SwapDataset(venue, tuple(res.swaps), build_snapshots(res.swaps, venue))
breakdowns, skipped = decompose_dataset(data)
print(f"{len(breakdowns)} swaps decomposed ({skipped} skipped: no pre-swap state)")

table = cost_table(breakdowns, cutoff_timestamp=res.spec.start_timestamp + 450)
print(f"{'segment':>12} {'component':>20} {'usd':>10} {'bps':>8}")
for row in table.rows():
    if row["usd"] is not None and row["component"] in ("total", "gas_fee", "lp_fee", "slippage_and_impact"):
        print(f"{row['segment']:>12} {row['component']:>20} {row['usd']:10.4f} {row['bps']:8.2f}")
