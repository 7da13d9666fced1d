"""Cached runs of the bundled default scenario, shared by the slower test modules."""

from functools import lru_cache

from hotspotloc.config import load_config
from hotspotloc.sim import run_simulation


@lru_cache(maxsize=None)
def default_run(seed):
    """``(config, radio, truth, records)`` for the default scenario at ``seed``."""
    cfg = load_config(None, [(["seed"], seed)])
    cells = cfg.build_cells()
    grid = cfg.build_grid(cells)
    radio = cfg.build_radio(grid, cells)
    truth, records = run_simulation(cfg.build_scenario(grid, cells), radio)
    return cfg, radio, truth, records
