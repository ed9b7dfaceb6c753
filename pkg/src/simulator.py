"""
Contagion Simulator
Orchestration of experiment runs: calibration, ensembles and sweeps, artifact
writing, run manifests and persistent state.
"""

import os
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime
from typing import Dict, List, Optional, Tuple

from dateutil import parser as date_parser
from dateutil.relativedelta import relativedelta

try:
    from . import __version__
    from .errors import SimulationError
    from .config import config_from_dict, config_to_dict
    from .ensemble import ExperimentConfig, TopologyKind, run_ensemble, sample_network, sweep_f, sweep_q
    from .balsheet import synthesize, total_assets
    from .shocks import CalibrationCache, CALIBRATION_TRIALS
    from .adapters.exporters import (F_SWEEP_COLUMNS, write_edge_list, write_json, write_result_csv,
                                     write_sheets_csv)
    from .adapters.svg_chart import plot_csv, plot_network
except ImportError:
    # Fallback for direct execution
    from __init__ import __version__
    from errors import SimulationError
    from config import config_from_dict, config_to_dict
    from ensemble import ExperimentConfig, TopologyKind, run_ensemble, sample_network, sweep_f, sweep_q
    from balsheet import synthesize, total_assets
    from shocks import CalibrationCache, CALIBRATION_TRIALS
    from adapters.exporters import (F_SWEEP_COLUMNS, write_edge_list, write_json, write_result_csv,
                                    write_sheets_csv)
    from adapters.svg_chart import plot_csv, plot_network

# Set up logging
logging.basicConfig(level=os.environ.get("LOG_LEVEL", "INFO"))
logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    config: Dict
    artifacts: List[str] = field(default_factory=list)
    calibration_scale: Optional[float] = None
    tool_version: str = __version__
    wall_time: float = 0.0
    created_at: str = ""



def _artifact_stem(out_dir: str, name: str, start_time: datetime) -> str:
    """Timestamped artifact path stem; runs within the same second get a _1, _2, ... suffix."""
    stem = os.path.join(out_dir, f"{name}_{start_time.strftime('%Y%m%d_%H%M%S')}")
    candidate, suffix = stem, 0
    while any(os.path.exists(candidate + ext) for ext in (".csv", ".json", "_manifest.json")):
        suffix += 1
        candidate = f"{stem}_{suffix}"
    return candidate


class ContagionSimulator:
    """Runs experiments and keeps their artifacts and run state in a data directory."""

    def __init__(self, data_dir: str = None, cache_dir: str = None, workers: Optional[int] = None,
                 calibration_trials: int = CALIBRATION_TRIALS):
        """
        Initialize the simulator.

        Args:
            data_dir: Directory for results and state. Defaults to env DATA_DIR or 'data'.
            cache_dir: Calibration cache directory. Defaults to env CALIBRATION_CACHE_DIR
                       or '<data_dir>/cache'.
            workers: Worker processes for sampling; defaults to the machine's CPU count.
            calibration_trials: Monte Carlo trials per calibration evaluation.
        """
        self.data_dir = data_dir or os.environ.get('DATA_DIR', 'data')
        os.makedirs(self.data_dir, exist_ok=True)
        cache_dir = cache_dir or os.environ.get('CALIBRATION_CACHE_DIR') or os.path.join(self.data_dir, 'cache')
        self.calibration_cache = CalibrationCache(cache_dir)
        self.workers = workers if workers else (os.cpu_count() or 1)
        self.calibration_trials = calibration_trials
        self.state_file = os.path.join(self.data_dir, 'state.json')

        logger.info(f"Simulator initialized with data directory: {self.data_dir}")
        logger.info(f"Calibration cache: {self.calibration_cache.cache_file}")

    def _load_state(self) -> Dict:
        """Load run state from JSON file."""
        try:
            if os.path.exists(self.state_file):
                with open(self.state_file, 'r', encoding='utf-8') as f:
                    return json.load(f)
            return {}
        except Exception as e:
            logger.error(f"Error loading state: {e}")
            return {}

    def _save_state(self, state: Dict):
        """Save run state to JSON file."""
        try:
            with open(self.state_file, 'w', encoding='utf-8') as f:
                json.dump(state, f, indent=2, ensure_ascii=False, default=str)
            logger.info(f"Saved state: {state}")
        except Exception as e:
            logger.error(f"Error saving state: {e}")

    def resolve_scale(self, config: ExperimentConfig) -> Tuple[ExperimentConfig, bool]:
        """Fill in the calibrated shock scale unless the config fixes one. Returns (config, cache_hit)."""
        if config.shock_scale is not None:
            return config, False
        calibration, hit = self.calibration_cache.get_or_calibrate(
            config.n_assets, config.calibration_gamma, config.target_p, config.dof,
            trials=self.calibration_trials, workers=self.workers,
        )
        return replace(config, shock_scale=calibration.scale), hit

    def run(self, config: ExperimentConfig, out_dir: Optional[str] = None) -> Dict:
        """
        Run an ensemble, or a sweep when the config names a sweep variable.

        Returns:
            Dictionary with run status, artifact paths and crisis statistics
        """
        start_time = datetime.now()
        out_dir = out_dir or self.data_dir
        logger.info(f"Starting experiment {config.name} ({config.topology.value})")

        try:
            os.makedirs(out_dir, exist_ok=True)
            config, _ = self.resolve_scale(config)

            if config.sweep_variable == "f":
                sweep = sweep_f(config, config.grid, workers=self.workers)
                columns, rows = sweep.columns, sweep.rows()
                summary = {"variable": "f", "points": [
                    {"value": p.value, "result": p.result.to_dict(),
                     "baseline_b": p.baseline_b.to_dict(), "baseline_c": p.baseline_c}
                    for p in sweep.points]}
            elif config.sweep_variable == "q":
                sweep = sweep_q(config, config.grid, workers=self.workers)
                columns, rows = sweep.columns, sweep.rows()
                summary = {"variable": "q", "points": [
                    {"value": p.value, "result": p.result.to_dict(), "R_total": p.ratio_total,
                     "R_shadow": p.ratio_shadow, "R_regulated": p.ratio_regulated}
                    for p in sweep.points]}
            else:
                result = run_ensemble(config, workers=self.workers)
                value = config.coupling if config.topology is TopologyKind.LAYERED else config.shadow_fraction
                columns = F_SWEEP_COLUMNS
                rows = [{"f_or_q": value, "crisis_F": result.crisis_F,
                         "crisis_F_shadow": result.crisis_F_shadow,
                         "crisis_F_regulated": result.crisis_F_regulated}]
                summary = {"variable": None, "points": [{"value": value, "result": result.to_dict()}]}

            stem = _artifact_stem(out_dir, config.name, start_time)
            csv_path, json_path, manifest_path = f"{stem}.csv", f"{stem}.json", f"{stem}_manifest.json"
            write_result_csv(csv_path, columns, rows)
            write_json(json_path, {"experiment": config.name, **summary})

            duration = (datetime.now() - start_time).total_seconds()
            manifest = RunManifest(
                config=config_to_dict(config),
                artifacts=[csv_path, json_path, manifest_path],
                calibration_scale=config.shock_scale,
                wall_time=round(duration, 2),
                created_at=start_time.isoformat(),
            )
            write_json(manifest_path, asdict(manifest))

            state = self._load_state()
            self._save_state({
                "last_run": datetime.now().isoformat(),
                "last_experiment": config.name,
                "last_manifest": manifest_path,
                "last_artifacts": manifest.artifacts,
                "total_runs": state.get("total_runs", 0) + 1,
            })

            return {
                "status": "success",
                "message": f"Experiment {config.name} finished",
                "csv": csv_path,
                "summary": json_path,
                "manifest": manifest_path,
                "calibration_scale": config.shock_scale,
                "rows": rows,
                "duration_seconds": round(duration, 2),
            }

        except Exception as e:
            logger.error(f"Error running experiment {config.name}: {e}")
            return {
                "status": "error",
                "message": f"Experiment failed: {str(e)}",
                "error": str(e),
                "duration_seconds": (datetime.now() - start_time).total_seconds(),
            }

    def sweep(self, config: ExperimentConfig, variable: str, grid: List[float],
              out_dir: Optional[str] = None) -> Dict:
        """Run `config` as an f- or q-sweep over `grid`, whatever its own [sweep] section says."""
        try:
            config = replace(config, sweep_variable=variable, grid=tuple(grid))
            config.validate()
        except SimulationError as e:
            logger.error(f"Invalid sweep for {config.name}: {e}")
            return {"status": "error", "message": f"Invalid sweep: {str(e)}", "error": str(e)}
        return self.run(config, out_dir)

    def rerun_manifest(self, manifest_path: str, out_dir: Optional[str] = None) -> Dict:
        """Rerun the exact config (seed and calibrated scale included) recorded in a manifest."""
        try:
            with open(manifest_path, 'r', encoding='utf-8') as f:
                manifest = json.load(f)
            config = config_from_dict(manifest["config"])
        except (OSError, KeyError, ValueError, SimulationError) as e:
            logger.error(f"Error reading manifest {manifest_path}: {e}")
            return {"status": "error", "message": f"Bad manifest: {str(e)}", "error": str(e)}
        return self.run(config, out_dir)

    def calibrate(self, n_assets: int, gamma: float, target_p: float, dof: float) -> Dict:
        """Calibrate (or fetch from cache) the shock amplitude."""
        try:
            calibration, hit = self.calibration_cache.get_or_calibrate(
                n_assets, gamma, target_p, dof, trials=self.calibration_trials, workers=self.workers)
            return {
                "status": "success",
                "message": "Cache hit" if hit else "Calibrated",
                "scale": calibration.scale,
                "estimated_p": calibration.estimated_p,
                "cache_hit": hit,
            }
        except Exception as e:
            logger.error(f"Error during calibration: {e}")
            return {"status": "error", "message": f"Calibration failed: {str(e)}", "error": str(e)}

    def plot(self, csv_path: str, svg_path: str) -> Dict:
        try:
            n_curves = plot_csv(csv_path, svg_path)
            return {"status": "success", "message": f"Wrote {svg_path}", "curves": n_curves}
        except Exception as e:
            logger.error(f"Error plotting {csv_path}: {e}")
            return {"status": "error", "message": f"Plot failed: {str(e)}", "error": str(e)}

    def plot_network(self, config: ExperimentConfig, svg_path: str, sample_index: int = 0) -> Dict:
        """Draw the network of one ensemble sample, shadow banks blue and regulated banks red."""
        try:
            network = sample_network(config, sample_index)
            assets = total_assets(network, config.system_params)
            title = f"{config.name}: {config.topology.base.value}, N={network.n_banks}, sample {sample_index}"
            plot_network(network, svg_path, assets=assets, title=title)
            return {
                "status": "success",
                "message": f"Wrote {svg_path}",
                "banks": network.n_banks,
                "shadow": network.topology.n_shadow,
                "edges": network.topology.n_edges,
            }
        except Exception as e:
            logger.error(f"Error drawing network: {e}")
            return {"status": "error", "message": f"Network plot failed: {str(e)}", "error": str(e)}

    def export_network(self, config: ExperimentConfig, path: str, sample_index: int = 0) -> Dict:
        """Write the network of one ensemble sample as an edge list."""
        try:
            network = sample_network(config, sample_index)
            write_edge_list(network, path)
            return {
                "status": "success",
                "message": f"Wrote {path}",
                "banks": network.n_banks,
                "edges": network.topology.n_edges,
                "exponent": network.exponent,
                "concentration": network.realized_concentration,
            }
        except Exception as e:
            logger.error(f"Error exporting network: {e}")
            return {"status": "error", "message": f"Export failed: {str(e)}", "error": str(e)}

    def export_sheets(self, config: ExperimentConfig, path: str, sample_index: int = 0) -> Dict:
        """Write the balance sheets of one ensemble sample as CSV."""
        try:
            network = sample_network(config, sample_index)
            sheets = synthesize(network, config.system_params)
            write_sheets_csv(sheets, network, path)
            return {
                "status": "success",
                "message": f"Wrote {path}",
                "banks": len(sheets),
                "realized_interbank_ratio": sheets.realized_interbank_ratio,
            }
        except Exception as e:
            logger.error(f"Error exporting balance sheets: {e}")
            return {"status": "error", "message": f"Export failed: {str(e)}", "error": str(e)}

    def get_statistics(self) -> Dict:
        """Statistics about past runs from the state file."""
        try:
            state = self._load_state()
            if not state.get("last_run"):
                return {"total_runs": 0, "last_run": None, "last_experiment": None, "artifacts": []}

            age = relativedelta(datetime.now(), date_parser.isoparse(state["last_run"]))
            parts = [f"{getattr(age, unit)} {unit}" for unit in ("years", "months", "days", "hours", "minutes")
                     if getattr(age, unit)]
            return {
                "total_runs": state.get("total_runs", 0),
                "last_run": state["last_run"],
                "last_run_age": ", ".join(parts) or "less than a minute",
                "last_experiment": state.get("last_experiment"),
                "last_manifest": state.get("last_manifest"),
                "artifacts": [p for p in state.get("last_artifacts", []) if os.path.exists(p)],
            }
        except Exception as e:
            logger.error(f"Error getting statistics: {e}")
            return {"error": str(e)}
