"""mavlab: maximal arbitrage value between AMM pools, CEXs and other AMMs."""
from .amm import (
    ClmmPool,
    CpmmPool,
    FeeParams,
    Side,
    SpotQuote,
    TickRange,
    TokenMeta,
    clmm_from_ranges,
    clmm_swap,
    cpmm_price_impact,
    cpmm_swap,
    decode_sqrt_price,
    decode_sqrt_price_exact,
    equivalent_reserves,
)
from .arbitrage import (
    ArbOpportunity,
    Direction,
    PayoffResult,
    amm_amm_mav,
    amm_amm_mav_numeric,
    clmm_cex_mav,
    cpmm_cex_mav,
    cpmm_cpmm_mav,
    expected_payoff,
    numeric_cex_mav,
)
from .costs import FeeBreakdown, cost_table, decompose_dataset, decompose_swap
from .episodes import (
    AlignedSeries,
    Episode,
    ThresholdConfig,
    accumulate_lvr,
    align,
    analyze_venue,
    cross_matrix,
    decay_times,
    derive_threshold,
    detect_episodes,
)
from .ingest import VenueConfig, block_grid, load_cex, load_swaps
from .optimize import numeric_mav
from .simulate import GapSpec, SimSpec, simulate_market

__version__ = "0.1.0"
