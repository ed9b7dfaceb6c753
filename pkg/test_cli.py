#!/usr/bin/env python3
"""
Tests for config files, the simulator front end and the CSV/SVG artifacts.
"""

import json
import os
import re
import subprocess
import sys
from dataclasses import replace
from datetime import datetime
from pathlib import Path

import pytest

# Add current directory to path
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from src.errors import ConfigError, ResultFormatError
from src.config import apply_overrides, load_config, parse_config, preset_path, PRESETS
from src.ensemble import TopologyKind
from src.adapters.exporters import F_SWEEP_COLUMNS, Q_SWEEP_COLUMNS, read_result_csv, write_result_csv
from src.adapters.svg_chart import plot_csv
from src.simulator import ContagionSimulator, _artifact_stem

Q_ROWS = [
    {"f_or_q": 0.0, "crisis_F": 592, "crisis_F_shadow": 468, "crisis_F_regulated": 124,
     "R_total": 0.0, "R_shadow": 0.0, "R_regulated": 0.0},
    {"f_or_q": 0.05, "crisis_F": 640, "crisis_F_shadow": 470, "crisis_F_regulated": 170,
     "R_total": 0.081, "R_shadow": 0.004, "R_regulated": 0.371},
    {"f_or_q": 1.0, "crisis_F": 700, "crisis_F_shadow": 472, "crisis_F_regulated": 228,
     "R_total": 0.182, "R_shadow": 0.009, "R_regulated": 0.839},
]


def test_presets_load():
    for name in PRESETS:
        config = load_config(str(preset_path(name)))
        assert config.name == name
    fig6 = load_config(str(preset_path("fig6")))
    assert fig6.topology is TopologyKind.LAYERED
    assert fig6.sweep_variable == "q"
    assert 0.0 in fig6.grid
    assert fig6.shock_scale is None


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="n_bank"):
        parse_config("[experiment]\nn_bank = 50\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[experiments]\nn_banks = 50\n")


def test_infeasible_config_names_constraint():
    with pytest.raises(ConfigError, match="interbank_ratio|theta"):
        parse_config("[parameters]\ninterbank_ratio = 1.5\n")
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nn_banks = lots\n")


def test_overrides():
    config = load_config(str(preset_path("fig4")))
    small = apply_overrides(config, samples=10, seed=3, n_banks=50)
    assert (small.samples, small.master_seed, small.n_banks) == (10, 3, 50)
    assert apply_overrides(config) is config


def test_smoke_run_writes_artifacts(tmp_path):
    simulator = ContagionSimulator(data_dir=str(tmp_path), workers=1)
    config = load_config(str(preset_path("smoke")))
    result = simulator.run(config)

    assert result["status"] == "success", result["message"]
    for key in ("csv", "summary", "manifest"):
        assert os.path.exists(result[key])
    columns, rows = read_result_csv(result["csv"])
    assert columns == F_SWEEP_COLUMNS
    assert [row["f_or_q"] for row in rows] == [0.0, 0.5, 1.0]

    with open(result["manifest"], encoding="utf-8") as f:
        manifest = json.load(f)
    assert manifest["calibration_scale"] == 0.003
    assert all(os.path.exists(path) for path in manifest["artifacts"])

    stats = simulator.get_statistics()
    assert stats["total_runs"] == 1
    assert stats["last_experiment"] == "smoke"


def test_rerun_from_manifest_reproduces_csv(tmp_path):
    simulator = ContagionSimulator(data_dir=str(tmp_path / "first"), workers=1)
    first = simulator.run(load_config(str(preset_path("smoke"))))
    again = simulator.rerun_manifest(first["manifest"], str(tmp_path / "second"))
    assert again["status"] == "success"
    assert Path(first["csv"]).read_bytes() == Path(again["csv"]).read_bytes()


def test_run_failure_is_reported(tmp_path):
    simulator = ContagionSimulator(data_dir=str(tmp_path), workers=1)
    config = load_config(str(preset_path("smoke")))
    result = simulator.run(replace(config, topology=TopologyKind.LAYERED))
    assert result["status"] == "error"


def test_plot_q_curves(tmp_path):
    csv_path = tmp_path / "fig6.csv"
    write_result_csv(str(csv_path), Q_SWEEP_COLUMNS, Q_ROWS)
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    assert plot_csv(str(csv_path), str(first)) == 3
    plot_csv(str(csv_path), str(second))
    svg = first.read_bytes()
    assert svg.count(b"<polyline") == 3
    assert svg == second.read_bytes()


def test_plot_skips_undefined_values(tmp_path):
    rows = [dict(row, R_shadow=None) for row in Q_ROWS]
    csv_path = tmp_path / "partial.csv"
    write_result_csv(str(csv_path), Q_SWEEP_COLUMNS, rows)
    assert plot_csv(str(csv_path), str(tmp_path / "partial.svg")) == 2


def test_plot_two_point_f_sweep(tmp_path):
    rows = [
        {"f_or_q": 0.0, "crisis_F": 3, "crisis_F_shadow": 0, "crisis_F_regulated": 3,
         "baseline_b": 3, "baseline_c": 3.0},
        {"f_or_q": 0.5, "crisis_F": 40, "crisis_F_shadow": 25, "crisis_F_regulated": 15,
         "baseline_b": 12, "baseline_c": 28.0},
    ]
    csv_path = tmp_path / "two.csv"
    write_result_csv(str(csv_path), F_SWEEP_COLUMNS, rows)
    svg_path = tmp_path / "two.svg"
    assert plot_csv(str(csv_path), str(svg_path)) == 3

    svg = svg_path.read_text(encoding="utf-8")
    # tick labels sit 4px below their tick line
    label_ys = re.findall(r'<text x="62" y="([0-9.]+)" text-anchor="end"', svg)
    assert len(label_ys) == 5
    assert all(re.fullmatch(r"\d+\.\d\d", y) for y in label_ys)
    assert float(label_ys[0]) == pytest.approx(365 + 4)


def test_sweep_overrides_config_grid(tmp_path):
    simulator = ContagionSimulator(data_dir=str(tmp_path), workers=1)
    config = apply_overrides(load_config(str(preset_path("smoke"))), samples=3, n_banks=30)
    result = simulator.sweep(config, "f", [0.0, 1.0])
    assert result["status"] == "success", result["message"]
    columns, rows = read_result_csv(result["csv"])
    assert columns == F_SWEEP_COLUMNS
    assert [row["f_or_q"] for row in rows] == [0.0, 1.0]

    wrong = simulator.sweep(config, "q", [0.0, 0.5])
    assert wrong["status"] == "error"
    empty = simulator.sweep(config, "f", [])
    assert empty["status"] == "error"


def test_same_second_runs_keep_separate_artifacts(tmp_path):
    start = datetime(2024, 1, 1, 12, 0, 0)
    first = _artifact_stem(str(tmp_path), "smoke", start)
    Path(first + ".csv").write_text("", encoding="utf-8")
    second = _artifact_stem(str(tmp_path), "smoke", start)
    assert second == first + "_1"
    Path(second + "_manifest.json").write_text("{}", encoding="utf-8")
    assert _artifact_stem(str(tmp_path), "smoke", start) == first + "_2"

    simulator = ContagionSimulator(data_dir=str(tmp_path), workers=1)
    config = apply_overrides(load_config(str(preset_path("smoke"))), samples=2, n_banks=20)
    runs = [simulator.run(config) for _ in range(3)]
    paths = {run["csv"] for run in runs}
    assert len(paths) == 3
    assert all(os.path.exists(path) for path in paths)


def test_plot_network_colours_banks_by_class(tmp_path):
    simulator = ContagionSimulator(data_dir=str(tmp_path), workers=1)
    base = replace(load_config(str(preset_path("smoke"))), n_banks=30, shadow_fraction=0.5)
    cases = [
        (base, 30),
        (replace(base, topology=TopologyKind.ASSET_CORRELATED), 30),
        (replace(base, topology=TopologyKind.LAYERED, n_banks=15, coupling=0.2, sweep_variable=None, grid=()), 30),
    ]
    for config, n_banks in cases:
        svg_path = tmp_path / f"{config.topology.value}.svg"
        result = simulator.plot_network(config, str(svg_path), sample_index=1)
        assert result["status"] == "success", result["message"]
        svg = svg_path.read_text(encoding="utf-8")
        assert svg.count('class="shadow"') == 15
        assert svg.count('class="regulated"') == n_banks - 15
        assert svg.count("<line ") == result["edges"]
        assert 'fill="#1f77b4"' in svg and 'fill="#d62728"' in svg

        again = tmp_path / "again.svg"
        simulator.plot_network(config, str(again), sample_index=1)
        assert again.read_bytes() == svg_path.read_bytes()


def test_plot_rejects_header_only_csv(tmp_path):
    csv_path = tmp_path / "empty.csv"
    csv_path.write_text(",".join(F_SWEEP_COLUMNS) + "\n", encoding="utf-8")
    svg_path = tmp_path / "empty.svg"
    with pytest.raises(ResultFormatError):
        plot_csv(str(csv_path), str(svg_path))
    assert not svg_path.exists()


def test_malformed_csv_reports_line(tmp_path):
    csv_path = tmp_path / "bad.csv"
    csv_path.write_text(",".join(F_SWEEP_COLUMNS) + "\n0,1,1,0,1,1\n0.5,x,1,0,1,1\n", encoding="utf-8")
    with pytest.raises(ResultFormatError, match="line 3"):
        read_result_csv(str(csv_path))


def test_command_line_smoke_and_plot(tmp_path):
    env = dict(os.environ, DATA_DIR=str(tmp_path), LOG_LEVEL="WARNING")
    script = str(current_dir / "run_simulator.py")
    run = subprocess.run(
        [sys.executable, script, "--workers", "1", "run", "--preset", "smoke", "--samples", "5", "--n", "40"],
        capture_output=True, text=True, env=env,
    )
    assert run.returncode == 0, run.stdout + run.stderr
    csv_path = next(tmp_path.glob("smoke_*.csv"))

    svg_path = tmp_path / "smoke.svg"
    plot = subprocess.run([sys.executable, script, "plot", str(csv_path), str(svg_path)],
                          capture_output=True, text=True, env=env)
    assert plot.returncode == 0, plot.stdout + plot.stderr
    assert svg_path.read_text(encoding="utf-8").count("<polyline") == 3

    sweep = subprocess.run(
        [sys.executable, script, "--workers", "1", "sweep", "--preset", "smoke", "--samples", "2", "--n", "20",
         "--variable", "f", "--grid", "0, 1"],
        capture_output=True, text=True, env=env,
    )
    assert sweep.returncode == 0, sweep.stdout + sweep.stderr
    assert "Sweeping f over 2 points" in sweep.stdout

    drawing = tmp_path / "network.svg"
    network = subprocess.run([sys.executable, script, "plot-network", "--preset", "smoke", "--n", "30", str(drawing)],
                             capture_output=True, text=True, env=env)
    assert network.returncode == 0, network.stdout + network.stderr
    assert drawing.read_text(encoding="utf-8").count('class="shadow"') == 15

    bad = subprocess.run([sys.executable, script, "calibrate", "--p", "0.6"],
                         capture_output=True, text=True, env=env)
    assert bad.returncode != 0


def main():
    """Run the tests without pytest."""
    import tempfile
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and callable(v)]
    failed = 0
    for test in tests:
        try:
            if "tmp_path" in test.__code__.co_varnames[:test.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as tmp:
                    test(Path(tmp))
            else:
                test()
            print(f"✅ {test.__name__}")
        except Exception as e:
            failed += 1
            print(f"❌ {test.__name__}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} tests passed")
    return failed == 0


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
