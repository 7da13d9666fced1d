"""Traffic hotspot localization from per-cell OMC KPIs.

The package is split along the pipeline:

* :mod:`hotspotloc.radio` -- pixel grid, site layout, path loss and best-server maps
* :mod:`hotspotloc.sim` -- seeded LTE-like system simulator producing ground truth and KPIs
* :mod:`hotspotloc.kpi` -- KPI record type and its CSV persistence
* :mod:`hotspotloc.localize` -- per-KPI weight maps, fusion and distance-decay smoothing
* :mod:`hotspotloc.evaluate` -- L1 error, weight CDFs, detection table, ablations
* :mod:`hotspotloc.cli` -- the ``hotspotloc`` command
"""

from hotspotloc.radio import Cell, PixelGrid, RadioMap, build_radio_map, hex_layout
from hotspotloc.kpi import KpiRecord, read_kpis, write_kpis
from hotspotloc.sim import GroundTruth, Scenario, run_simulation
from hotspotloc.localize import FusionConfig, WeightMap, localize
from hotspotloc.evaluate import EvalReport, ablate, detection_table, l1_error

__version__ = "0.1.0"

__all__ = [
    "Cell",
    "EvalReport",
    "FusionConfig",
    "GroundTruth",
    "KpiRecord",
    "PixelGrid",
    "RadioMap",
    "Scenario",
    "WeightMap",
    "ablate",
    "build_radio_map",
    "detection_table",
    "hex_layout",
    "l1_error",
    "localize",
    "read_kpis",
    "run_simulation",
    "write_kpis",
]
