import filecmp

import numpy as np
import pytest

from conftest import run_pipeline
from mavlab.amm import CpmmPool
from mavlab.arbitrage import cpmm_cex_mav
from mavlab.episodes import ThresholdConfig
from mavlab.errors import InvalidInputError
from mavlab.ingest import VenueConfig
from mavlab.simulate import GapSpec, SimSpec, random_gap_schedule, simulate_market

BASE = VenueConfig("base", "base")


def test_same_seed_byte_identical(tmp_path):
    spec = SimSpec(seed=5, duration_sec=400, gaps=(GapSpec(20, 0.004, 6),), gas_l2_usd=0.01)
    a = simulate_market(spec, BASE).write(tmp_path / "a")
    b = simulate_market(spec, BASE).write(tmp_path / "b")
    for k in a:
        assert filecmp.cmp(a[k], b[k], shallow=False)


def test_different_seed_differs():
    a = simulate_market(SimSpec(seed=1, duration_sec=100), BASE)
    b = simulate_market(SimSpec(seed=2, duration_sec=100), BASE)
    assert a.cex != b.cex


def test_zero_gaps_zero_episodes(tmp_path):
    spec = SimSpec(seed=3, duration_sec=900, noise_amplitude=2e-4)
    res = simulate_market(spec, BASE)
    assert res.manifest == []
    rep, series = run_pipeline(res, tmp_path, ThresholdConfig.fixed(2.5e-4))
    assert max(series.gaps()) <= 2e-4 * (1 + 1e-9)
    assert rep.episodes == ()


def test_single_gap_recovered(tmp_path):
    spec = SimSpec(seed=8, duration_sec=600, gaps=(GapSpec(40, 0.003, 15),), noise_amplitude=5e-4)
    res = simulate_market(spec, BASE)
    rep, _ = run_pipeline(res, tmp_path, ThresholdConfig.fixed(0.0015))
    (ep,) = rep.episodes
    (m,) = res.manifest
    assert ep.block_count == 15
    assert (ep.start_block, ep.end_block) == (m["start_block"], m["end_block"])
    assert ep.decay_seconds_from_start == m["decay_seconds"] == 30


def test_manifest_fields_and_implied_mav():
    spec = SimSpec(seed=2, duration_sec=300, gaps=(GapSpec(10, -0.005, 4),))
    res = simulate_market(spec, BASE)
    (m,) = res.manifest
    assert {"start_block", "epsilon", "persistence_blocks", "implied_mav"} <= set(m)
    assert m["epsilon"] == -0.005 and m["persistence_blocks"] == 4
    # rebuild the pinned pool: the generator keeps x * y = x0^2 * p0 throughout
    price = [p for b, _, p in res.truth if b == m["start_block"]][-1]
    ts = next(r.timestamp_sec for r in res.swaps if r.block_number == m["start_block"])
    close = res.cex[ts - spec.start_timestamp].close
    assert price == pytest.approx(close * (1 - 0.005), rel=1e-12)
    L = spec.initial_reserve_x * spec.initial_price ** 0.5
    want = cpmm_cex_mav(CpmmPool.from_price(price, L), close, BASE.fees).mav
    assert m["implied_mav"] == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("chain,bt", [("arbitrum", None), ("zksync", None), ("ethereum", 12.0)])
def test_recovery_other_chains(tmp_path, chain, bt):
    venue = VenueConfig(chain, chain, block_time_sec=bt)
    spec = SimSpec(seed=4, duration_sec=900, gaps=(GapSpec(10, 0.006, 5), GapSpec(30, -0.004, 8)), noise_amplitude=5e-4)
    res = simulate_market(spec, venue)
    rep, _ = run_pipeline(res, tmp_path, ThresholdConfig.fixed(0.002), fmt="jsonl")
    got = [(e.start_block, e.end_block) for e in rep.episodes]
    assert got == [(m["start_block"], m["end_block"]) for m in res.manifest]
    assert [e.block_count for e in rep.episodes] == [5, 8]


@pytest.mark.parametrize("gaps,kw", [
    ((GapSpec(0, 0.01, 3),), {}),
    ((GapSpec(5, 0.01, 3), GapSpec(8, 0.01, 3)), {}),
    ((GapSpec(5, 0.0001, 3),), {}),
    ((GapSpec(5, 0.01, 0),), {}),
    ((), {"volatility": -1.0}),
    ((), {"duration_sec": 1}),
])
def test_invalid_specs(gaps, kw):
    with pytest.raises(InvalidInputError):
        SimSpec(gaps=gaps, **kw)


def test_gap_past_end_rejected():
    with pytest.raises(InvalidInputError):
        simulate_market(SimSpec(duration_sec=20, gaps=(GapSpec(5, 0.01, 30),)), BASE)


def test_from_dict():
    spec = SimSpec.from_dict({"seed": 3, "gaps": [{"start": 5, "epsilon": 0.01, "persistence_blocks": 2}]})
    assert spec.gaps == (GapSpec(5, 0.01, 2),)
    with pytest.raises(InvalidInputError):
        SimSpec.from_dict({"speed": 3})


def test_random_gap_schedule_is_valid():
    gaps = random_gap_schedule(np.random.default_rng(0), 5)
    SimSpec(duration_sec=10_000, gaps=gaps)
    assert all(0.001 <= abs(g.epsilon) <= 0.01 for g in gaps)
