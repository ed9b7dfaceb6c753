#!/usr/bin/env python3
"""
Command-line interface for the Shadow-Bank Contagion Simulator.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.errors import SimulationError
from src.config import apply_overrides, load_config, parse_grid, preset_path, PRESETS
from src.shocks import CALIBRATION_GAMMA, CALIBRATION_P, DEFAULT_DOF
from src.simulator import ContagionSimulator


def _add_config_arguments(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=PRESETS, help="Run a shipped experiment preset")
    source.add_argument("--config", metavar="PATH", help="Experiment config file (INI)")
    parser.add_argument("--samples", type=int, help="Override the number of Monte Carlo samples")
    parser.add_argument("--seed", type=int, help="Override the master seed")
    parser.add_argument("--n", type=int, dest="n_banks", help="Override the number of banks (per layer when layered)")


def _load(args):
    if args.preset:
        path = preset_path(args.preset)
    elif args.config:
        path = args.config
    else:
        raise SimulationError("Give --preset or --config")
    config = load_config(str(path))
    return apply_overrides(config, samples=args.samples, seed=args.seed, n_banks=args.n_banks)


def _finish(result: dict):
    print(f"Status: {result['status']}")
    print(f"Message: {result['message']}")
    if result['status'] == 'error':
        print(f"❌ {result.get('error', result['message'])}")
        sys.exit(1)


def _grid(text: str):
    try:
        grid = parse_grid(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not grid:
        raise argparse.ArgumentTypeError("grid is empty")
    return grid


def main():
    parser = argparse.ArgumentParser(description="Shadow-bank interbank contagion simulator")
    parser.add_argument("--workers", type=int, default=os.cpu_count(), help="Worker processes (default: all CPUs)")
    parser.add_argument("--out-dir", help="Output directory (default: DATA_DIR or ./data)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the ensemble or sweep a config describes")
    _add_config_arguments(run)
    run.add_argument("--from-manifest", metavar="PATH", help="Rerun the config recorded in a run manifest")

    sweep = commands.add_parser("sweep", help="Sweep the shadow fraction f or the inter-layer coupling q")
    _add_config_arguments(sweep)
    sweep.add_argument("--variable", choices=("f", "q"), help="Sweep variable (default: the config's)")
    sweep.add_argument("--grid", type=_grid, help="Comma-separated values in [0, 1] (default: the config's)")

    plot = commands.add_parser("plot", help="Render a result CSV as an SVG line chart")
    plot.add_argument("csv", help="Result CSV written by 'run'")
    plot.add_argument("svg", help="Output SVG path")

    plot_network = commands.add_parser("plot-network", help="Draw one sample's network as SVG")
    _add_config_arguments(plot_network)
    plot_network.add_argument("--sample", type=int, default=0, help="Sample index")
    plot_network.add_argument("svg", help="Output SVG path")

    calibrate = commands.add_parser("calibrate", help="Calibrate the shock amplitude (cached)")
    calibrate.add_argument("--assets", type=int, default=2, help="Number of external asset classes M")
    calibrate.add_argument("--gamma", type=float, default=CALIBRATION_GAMMA, help="Equity ratio of the standalone bank")
    calibrate.add_argument("--p", type=float, default=CALIBRATION_P, help="Target standalone failure probability")
    calibrate.add_argument("--dof", type=float, default=DEFAULT_DOF, help="Student-t degrees of freedom")

    for name, help_text in (("export-network", "Write one sample's network as an edge list"),
                            ("export-sheets", "Write one sample's balance sheets as CSV")):
        export = commands.add_parser(name, help=help_text)
        _add_config_arguments(export)
        export.add_argument("--sample", type=int, default=0, help="Sample index")
        export.add_argument("output", help="Output file path")

    commands.add_parser("stats", help="Show statistics about past runs")

    args = parser.parse_args()
    logging.basicConfig(level=os.environ.get("LOG_LEVEL", "INFO"))

    print("🏦 Shadow-Bank Contagion Simulator CLI")
    print("=" * 40)

    simulator = ContagionSimulator(data_dir=args.out_dir, workers=args.workers)

    if args.command == "stats":
        print("📊 Getting statistics...")
        stats = simulator.get_statistics()
        if "error" in stats:
            print(f"❌ Error: {stats['error']}")
            sys.exit(1)
        print(f"Total runs: {stats.get('total_runs', 0)}")
        print(f"Last run: {stats.get('last_run') or 'Never'}")
        if stats.get("last_run"):
            print(f"Age: {stats['last_run_age']}")
            print(f"Experiment: {stats['last_experiment']}")
            print(f"Manifest: {stats['last_manifest']}")
            for path in stats["artifacts"]:
                print(f"  {path}")
        return

    if args.command == "plot":
        print(f"🎨 Plotting {args.csv}...")
        result = simulator.plot(args.csv, args.svg)
        if result['status'] == 'success':
            print(f"✅ {result['curves']} curves written to {args.svg}")
        _finish(result)
        return

    if args.command == "calibrate":
        print(f"🎯 Calibrating the shock amplitude for M={args.assets}...")
        result = simulator.calibrate(args.assets, args.gamma, args.p, args.dof)
        if result['status'] == 'success':
            print(f"Scale: {result['scale']:.10g}")
            print(f"Estimated p: {result['estimated_p']:.6g}")
        _finish(result)
        return

    if args.command == "run" and args.from_manifest:
        print(f"🔄 Rerunning {args.from_manifest}...")
        result = simulator.rerun_manifest(args.from_manifest, args.out_dir)
    else:
        try:
            config = _load(args)
        except SimulationError as e:
            _finish({"status": "error", "message": str(e)})
            return
        if args.command == "export-network":
            print(f"📥 Exporting the network of sample {args.sample} to {args.output}...")
            result = simulator.export_network(config, args.output, args.sample)
        elif args.command == "export-sheets":
            print(f"📥 Exporting the balance sheets of sample {args.sample} to {args.output}...")
            result = simulator.export_sheets(config, args.output, args.sample)
        elif args.command == "plot-network":
            print(f"🎨 Drawing the network of sample {args.sample}...")
            result = simulator.plot_network(config, args.svg, args.sample)
            if result['status'] == 'success':
                print(f"✅ {result['banks']} banks ({result['shadow']} shadow), {result['edges']} loans")
        elif args.command == "sweep":
            variable = args.variable or config.sweep_variable
            grid = args.grid or config.grid
            if variable is None:
                _finish({"status": "error", "message": "Give --variable or use a config with a [sweep] section"})
                return
            print(f"🔄 Sweeping {variable} over {len(grid)} points for {config.name} "
                  f"({config.topology.value}, {config.samples} samples)...")
            result = simulator.sweep(config, variable, list(grid), args.out_dir)
        else:
            print(f"🔄 Running {config.name} ({config.topology.value}, {config.samples} samples)...")
            result = simulator.run(config, args.out_dir)

    if result['status'] == 'success' and 'csv' in result:
        print(f"✅ CSV: {result['csv']}")
        print(f"Summary: {result['summary']}")
        print(f"Manifest: {result['manifest']}")
        print(f"Calibration scale: {result['calibration_scale']:.10g}")
        print(f"Duration: {result.get('duration_seconds', 0):.2f} seconds")
    _finish(result)


if __name__ == "__main__":
    main()
