"""Command-line entry point: ``hotspotloc {simulate,localize,evaluate,ablate}``.

Exit codes: 0 success, 1 invalid input (config, files, schema), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from hotspotloc.config import RunConfig, load_config, parse_override
from hotspotloc.evaluate import (ablate, evaluate, ta_only_estimate, write_ablation, write_report)
from hotspotloc.kpi import KpiFormatError, read_kpis, write_kpis
from hotspotloc.localize import WEIGHTS_HEADER, WeightMap, localize, read_weights_csv, write_weights_csv
from hotspotloc.radio import ConfigurationError, check_radio_consistent, read_radio_csv, write_radio_csv
from hotspotloc.sim import TRUTH_HEADER, read_truth_csv, run_simulation, write_truth_csv

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _parse_alpha(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--alpha expects 5 comma-separated numbers, got {text!r}") from None
    if len(values) != 5:
        raise argparse.ArgumentTypeError(f"--alpha expects 5 numbers, got {len(values)}")
    return values


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", metavar="PATH", **({"default": None} | default),
                        help="YAML run configuration (defaults apply to missing keys)")
    parser.add_argument("--seed", type=int, **({"default": None} | default), help="override the config seed")
    parser.add_argument("--out-dir", metavar="PATH", **({"default": "."} | default),
                        help="directory that relative paths in the config resolve against")
    parser.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        **({"default": []} | default), help="override one config key, e.g. traffic.arrival_rate=5")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hotspotloc", description="Traffic hotspot localization from cell KPIs.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario; write KPI, truth and radio-map files")
    _global_flags(p, suppress=True)

    p = sub.add_parser("localize", help="estimate the traffic map from a KPI file")
    _global_flags(p, suppress=True)
    p.add_argument("--kpis", metavar="PATH", help="KPI CSV (default: paths.kpis)")
    p.add_argument("--radio", metavar="PATH", help="radio-map CSV (default: paths.radio)")
    p.add_argument("--weights", metavar="PATH", help="output weight-map CSV (default: paths.weights)")
    p.add_argument("--alpha", type=_parse_alpha, metavar="A,B,C,D,E", help="fusion coefficients")
    p.add_argument("--lambda", dest="smoothing_m", type=float, metavar="M", help="smoothing length in meters")

    p = sub.add_parser("evaluate", help="compare a weight map with the ground truth")
    _global_flags(p, suppress=True)
    p.add_argument("--weights", metavar="PATH", help="weight-map CSV, or a truth CSV used as the estimate")
    p.add_argument("--truth", metavar="PATH", help="ground-truth CSV (default: paths.truth)")
    p.add_argument("--report-dir", metavar="PATH", help="output directory (default: paths.report_dir)")

    p = sub.add_parser("ablate", help="simulate once, then localize and evaluate every KPI subset")
    _global_flags(p, suppress=True)
    p.add_argument("--alpha", type=_parse_alpha, metavar="A,B,C,D,E", help="fusion coefficients")
    p.add_argument("--lambda", dest="smoothing_m", type=float, metavar="M", help="smoothing length in meters")
    return parser


def _config(args) -> RunConfig:
    overrides = [parse_override(o) for o in args.overrides]
    if args.seed is not None:
        overrides.append((["seed"], args.seed))
    if getattr(args, "alpha", None) is not None:
        overrides.append((["fusion", "alpha"], args.alpha))
    if getattr(args, "smoothing_m", None) is not None:
        overrides.append((["fusion", "smoothing_m"], args.smoothing_m))
    return load_config(args.config, overrides)


def _resolve(explicit, cfg: RunConfig, name: str, out_dir) -> Path:
    return Path(explicit) if explicit else cfg.path(name, out_dir)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = cfg.build_cells()
    grid = cfg.build_grid(cells)
    radio = cfg.build_radio(grid, cells)
    scenario = cfg.build_scenario(grid, cells)
    truth, records = run_simulation(scenario, radio)
    write_kpis(records, cfg.path("kpis", out))
    write_truth_csv(truth, cfg.path("truth", out))
    write_radio_csv(radio, cfg.path("radio", out))
    print(f"simulate: cells={len(cells)} periods={scenario.n_periods} sessions={int(truth.access.sum())} "
          f"blocked={truth.n_blocked} seed={cfg.seed}")
    return EXIT_OK


def cmd_localize(args) -> int:
    cfg = _config(args)
    kpi_path = _resolve(args.kpis, cfg, "kpis", args.out_dir)
    radio_path = _resolve(args.radio, cfg, "radio", args.out_dir)
    weights_path = _resolve(args.weights, cfg, "weights", args.out_dir)
    radio = cfg.build_radio()
    check_radio_consistent(radio, read_radio_csv(radio_path))
    records = read_kpis(kpi_path, set(radio.cell_ids.tolist()))
    result = localize(records, radio, cfg.build_fusion())
    weights_path.parent.mkdir(parents=True, exist_ok=True)
    write_weights_csv(result, weights_path)
    peak = np.unravel_index(int(np.argmax(result.smoothed.w)), result.grid.shape)
    x, y = result.grid.center(*peak)
    print(f"localize: records={len(records)} pixels={result.grid.n_pixels} "
          f"peak=({float(x):.1f}, {float(y):.1f}) -> {weights_path}")
    return EXIT_OK


def _read_estimate(path: Path, cfg: RunConfig):
    """``(grid, estimate, w1)`` from a weight-map CSV, or from a truth CSV used as the estimate."""
    if not path.exists():
        raise FileNotFoundError(f"weights file not found: {path}")
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header == TRUTH_HEADER:
        grid = cfg.build_grid()
        est = read_truth_csv(path, grid).access.astype(float)
        return grid, est, None
    if header != WEIGHTS_HEADER:
        raise ConfigurationError(f"{path}: neither a weight-map nor a truth file (header {header})")
    grid, cols = read_weights_csv(path)
    return grid, cols["smoothed"], WeightMap(grid, cols["w1"])


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    weights_path = _resolve(args.weights, cfg, "weights", args.out_dir)
    truth_path = _resolve(args.truth, cfg, "truth", args.out_dir)
    report_dir = _resolve(args.report_dir, cfg, "report_dir", args.out_dir)
    grid, est, w1 = _read_estimate(weights_path, cfg)
    truth = read_truth_csv(truth_path, grid)
    if not truth.access.sum() > 0:
        raise ConfigurationError(f"{truth_path}: ground truth has no sessions")
    ta_only = ta_only_estimate(w1, cfg.build_fusion()).w if w1 is not None and w1.total > 0 else None
    ev = cfg.evaluation
    report = evaluate(est, truth, ta_only=ta_only, thresholds=ev.thresholds, n_points=ev.cdf_points,
                      weighting=ev.cdf_weighting)
    write_report(report, report_dir)
    print(f"evaluate: l1_access={report.l1_error_access:.6f} l1_elapsed={report.l1_error_elapsed:.6f} "
          f"-> {report_dir}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    out_dir = cfg.path("ablation_dir", args.out_dir)
    cells = cfg.build_cells()
    grid = cfg.build_grid(cells)
    radio = cfg.build_radio(grid, cells)
    truth, records = run_simulation(cfg.build_scenario(grid, cells), radio)
    rows = ablate(records, radio, truth, cfg.build_fusion())
    write_ablation(rows, out_dir)
    print(f"{'subset':<16}{'l1_access':>12}{'l1_elapsed':>12}")
    for r in rows:
        print(f"{r.name:<16}{r.l1_access:>12.6f}{r.l1_elapsed:>12.6f}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "localize": cmd_localize, "evaluate": cmd_evaluate, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, KpiFormatError, FileNotFoundError) as exc:
        print(f"hotspotloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"hotspotloc {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
