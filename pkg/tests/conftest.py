from mavlab.episodes import align, analyze_venue
from mavlab.ingest import block_grid, load_cex, load_swaps


def run_pipeline(result, out_dir, cfg, fmt="csv"):
    """Write a simulation to disk, read it back and analyse it end to end."""
    venue = result.venue
    paths = result.write(out_dir, fmt)
    ds = load_swaps(paths["swaps"], venue)
    series = align(block_grid(ds), load_cex(paths["cex"]), venue.block_time_sec, venue.chain, venue.name)
    return analyze_venue(series, cfg, venue.fees), series


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
