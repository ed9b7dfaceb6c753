"""
Monte Carlo ensemble harness.
Regenerates network, balance sheets, portfolio and shock for every sample,
collects the bankruptcy distribution P(F), and runs the shadow-fraction and
inter-layer coupling sweeps with their baselines.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    from .errors import InvalidParameterError
    from .netgen import (assign_weights, build_layered, generate_scale_free,
                         mix_asset_correlated, mix_random)
    from .balsheet import SystemParams, average_gamma, homogenize, synthesize
    from .shocks import DEFAULT_DOF, no_shock, sample_portfolio, sample_shock
    from .cascade import run_cascade
except ImportError:
    # Fallback for direct execution
    from errors import InvalidParameterError
    from netgen import (assign_weights, build_layered, generate_scale_free,
                        mix_asset_correlated, mix_random)
    from balsheet import SystemParams, average_gamma, homogenize, synthesize
    from shocks import DEFAULT_DOF, no_shock, sample_portfolio, sample_shock
    from cascade import run_cascade

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 1000
DEFAULT_MASTER_SEED = 20140101


class TopologyKind(str, Enum):
    RANDOM_MIXING = "random_mixing"
    ASSET_CORRELATED = "asset_correlated"
    LAYERED = "layered"
    HOMOGENEOUS_RANDOM_MIXING = "homogeneous_random_mixing"
    HOMOGENEOUS_ASSET_CORRELATED = "homogeneous_asset_correlated"

    @property
    def is_homogeneous(self) -> bool:
        return self.value.startswith("homogeneous_")

    @property
    def base(self) -> "TopologyKind":
        return TopologyKind(self.value.replace("homogeneous_", "")) if self.is_homogeneous else self


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One ensemble experiment. For the layered topology `n_banks` counts banks
    per layer; `shock_scale` must be filled in (calibrated) before running.
    """
    name: str = "experiment"
    topology: TopologyKind = TopologyKind.RANDOM_MIXING
    n_banks: int = 500
    n_assets: int = 2
    interbank_ratio: float = 0.3
    gamma_shadow: float = 0.06
    gamma_regulated: float = 0.1
    denseness: float = 0.05
    concentration: float = 0.25
    concentration_tolerance: float = 0.02
    strict_concentration: bool = True
    shadow_fraction: float = 0.5
    coupling: float = 0.0
    dof: float = DEFAULT_DOF
    calibration_gamma: float = 0.07
    target_p: float = 1e-3
    shock_scale: Optional[float] = None
    samples: int = DEFAULT_SAMPLES
    master_seed: int = DEFAULT_MASTER_SEED
    sweep_variable: Optional[str] = None
    grid: Tuple[float, ...] = ()

    @property
    def system_params(self) -> SystemParams:
        return SystemParams(self.interbank_ratio, self.gamma_shadow, self.gamma_regulated)

    @property
    def total_banks(self) -> int:
        return 2 * self.n_banks if self.topology is TopologyKind.LAYERED else self.n_banks

    def validate(self):
        if self.samples < 1:
            raise InvalidParameterError(f"Need at least one sample, got {self.samples}")
        if self.n_banks < 2:
            raise InvalidParameterError(f"Need at least 2 banks, got {self.n_banks}")
        if self.n_assets < 1:
            raise InvalidParameterError(f"Need at least one asset class, got {self.n_assets}")
        for name in ("shadow_fraction", "coupling", "denseness", "concentration"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")
        if any(not 0 <= g <= 1 for g in self.grid):
            raise InvalidParameterError(f"Grid values must lie in [0, 1], got {list(self.grid)}")
        if self.sweep_variable not in (None, "f", "q"):
            raise InvalidParameterError(f"Sweep variable must be 'f' or 'q', got {self.sweep_variable}")
        if self.sweep_variable is not None and not self.grid:
            raise InvalidParameterError(f"Sweep over {self.sweep_variable} needs a non-empty grid")
        if self.shock_scale is not None and self.shock_scale < 0:
            raise InvalidParameterError(f"Shock scale must be >= 0, got {self.shock_scale}")
        self.system_params.validate()

    def at(self, value: float) -> "ExperimentConfig":
        """This config with the sweep variable set to `value`."""
        if self.sweep_variable == "q":
            return replace(self, coupling=value)
        return replace(self, shadow_fraction=value)


@dataclass(frozen=True)
class SampleOutcome:
    index: int
    F: int
    F_shadow: int
    F_regulated: int
    baseline: Optional[Tuple[int, int, int]] = None
    gamma_bar: Optional[float] = None


@dataclass
class EnsembleResult:
    histogram: Dict[int, int]
    crisis_F: int
    crisis_F_shadow: int
    crisis_F_regulated: int
    samples_run: int
    n_banks: int
    mean_F: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "crisis_F": self.crisis_F,
            "crisis_F_shadow": self.crisis_F_shadow,
            "crisis_F_regulated": self.crisis_F_regulated,
            "samples_run": self.samples_run,
            "n_banks": self.n_banks,
            "mean_F": self.mean_F,
        }


def child_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Seed of sample `index`; reproducible on its own, independent of worker layout."""
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def sample_streams(config: ExperimentConfig, index: int) -> List[np.random.SeedSequence]:
    """Network, class, portfolio and shock seeds of sample `index`."""
    return child_seed(config.master_seed, index).spawn(4)


def sample_network(config: ExperimentConfig, index: int = 0):
    network_seed, class_seed, _, _ = sample_streams(config, index)
    return build_network(config, network_seed, class_seed)


def quantile_999(samples: Sequence[int]) -> int:
    """The 999th 1000-quantile: sorted value at index ceil(0.999*S) - 1."""
    if len(samples) == 0:
        raise InvalidParameterError("Cannot take a quantile of no samples")
    ordered = sorted(samples)
    index = (999 * len(ordered) + 999) // 1000 - 1
    return ordered[index]


def summarize(counts: Sequence[Tuple[int, int, int]], n_banks: int) -> EnsembleResult:
    """
    Aggregate (F, F_shadow, F_regulated) per sample. Class counts come from a
    sample realizing the crisis quantile, preferring the larger shadow count.
    """
    if not counts:
        raise InvalidParameterError("Cannot summarize an empty ensemble")
    totals = [c[0] for c in counts]
    crisis = quantile_999(totals)
    scenario = max((c for c in counts if c[0] == crisis), key=lambda c: c[1])
    return EnsembleResult(
        histogram=dict(sorted(Counter(totals).items())),
        crisis_F=crisis,
        crisis_F_shadow=scenario[1],
        crisis_F_regulated=scenario[2],
        samples_run=len(counts),
        n_banks=n_banks,
        mean_F=float(np.mean(totals)),
    )


def build_network(config: ExperimentConfig, network_seed, class_seed):
    """Weighted, class-labelled network for one sample."""
    kind = config.topology.base
    if kind is TopologyKind.LAYERED:
        return build_layered(config.n_banks, config.denseness, config.coupling, config.concentration,
                             network_seed, config.concentration_tolerance, config.strict_concentration)

    topology = generate_scale_free(config.n_banks, config.denseness, network_seed)
    if kind is TopologyKind.RANDOM_MIXING:
        topology = mix_random(topology, config.shadow_fraction, class_seed)
    network = assign_weights(topology, config.concentration, config.concentration_tolerance,
                             strict=config.strict_concentration)
    if kind is TopologyKind.ASSET_CORRELATED:
        network = network.relabel(mix_asset_correlated(network, config.shadow_fraction,
                                                       params=config.system_params))
    return network


def simulate_sample(config: ExperimentConfig, index: int, with_baseline: bool = False) -> SampleOutcome:
    """
    One Monte Carlo sample. With `with_baseline` the same draws are re-run with
    every bank at the system's average equity ratio.
    """
    if config.shock_scale is None:
        raise InvalidParameterError("Shock scale is not calibrated")
    network_seed, class_seed, portfolio_seed, shock_seed = sample_streams(config, index)

    network = build_network(config, network_seed, class_seed)
    sheets = synthesize(network, config.system_params)
    portfolio = sample_portfolio(network.n_banks, config.n_assets, portfolio_seed)
    if config.shock_scale > 0:
        shock = sample_shock(config.n_assets, config.shock_scale, config.dof, shock_seed)
    else:
        shock = no_shock(config.n_assets, config.dof)

    outcome = run_cascade(sheets, network, portfolio, shock)
    baseline, gamma_bar = None, None
    if with_baseline:
        gamma_bar = average_gamma(sheets)
        flat = run_cascade(homogenize(sheets), network, portfolio, shock)
        baseline = (flat.F, flat.F_shadow, flat.F_regulated)

    return SampleOutcome(index, outcome.F, outcome.F_shadow, outcome.F_regulated, baseline, gamma_bar)


class SampleRunner:
    """Runs samples in-process or on a worker pool; results always come back in index order."""

    def __init__(self, workers: int = 1, chunksize: int = 8):
        self.workers = max(1, int(workers))
        self.chunksize = chunksize
        self._pool: Optional[Pool] = None

    def __enter__(self) -> "SampleRunner":
        if self.workers > 1:
            self._pool = Pool(processes=self.workers)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def run(self, config: ExperimentConfig, with_baseline: bool = False) -> List[SampleOutcome]:
        task = partial(simulate_sample, config, with_baseline=with_baseline)
        indices = range(config.samples)
        if self._pool is None:
            outcomes = [task(i) for i in indices]
        else:
            outcomes = list(self._pool.imap(task, indices, chunksize=self.chunksize))
        return sorted(outcomes, key=lambda o: o.index)


def _heterogeneous(outcomes: List[SampleOutcome]) -> List[Tuple[int, int, int]]:
    return [(o.F, o.F_shadow, o.F_regulated) for o in outcomes]


def _homogeneous(outcomes: List[SampleOutcome]) -> List[Tuple[int, int, int]]:
    return [o.baseline for o in outcomes]


def run_ensemble(config: ExperimentConfig, workers: int = 1,
                 runner: Optional[SampleRunner] = None) -> EnsembleResult:
    """Run `config.samples` independent samples and summarize P(F)."""
    config.validate()
    homogeneous = config.topology.is_homogeneous
    if runner is None:
        with SampleRunner(workers) as own:
            outcomes = own.run(config, with_baseline=homogeneous)
    else:
        outcomes = runner.run(config, with_baseline=homogeneous)
    counts = _homogeneous(outcomes) if homogeneous else _heterogeneous(outcomes)
    result = summarize(counts, config.total_banks)
    logger.info(f"Ensemble {config.name} ({config.topology.value}): {result.samples_run} samples, "
                f"crisis F={result.crisis_F} (shadow {result.crisis_F_shadow}, "
                f"regulated {result.crisis_F_regulated})")
    return result


@dataclass
class SweepPoint:
    value: float
    result: EnsembleResult
    baseline_b: Optional[EnsembleResult] = None
    baseline_c: Optional[float] = None
    ratio_total: Optional[float] = None
    ratio_shadow: Optional[float] = None
    ratio_regulated: Optional[float] = None


@dataclass
class SweepResult:
    variable: str
    points: List[SweepPoint] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        head = ["f_or_q", "crisis_F", "crisis_F_shadow", "crisis_F_regulated"]
        if self.variable == "q":
            return head + ["R_total", "R_shadow", "R_regulated"]
        return head + ["baseline_b", "baseline_c"]

    def rows(self) -> List[Dict]:
        rows = []
        for p in self.points:
            row = {
                "f_or_q": p.value,
                "crisis_F": p.result.crisis_F,
                "crisis_F_shadow": p.result.crisis_F_shadow,
                "crisis_F_regulated": p.result.crisis_F_regulated,
            }
            if self.variable == "q":
                row.update(R_total=p.ratio_total, R_shadow=p.ratio_shadow, R_regulated=p.ratio_regulated)
            else:
                row.update(baseline_b=p.baseline_b.crisis_F if p.baseline_b else None,
                           baseline_c=p.baseline_c)
            rows.append(row)
        return rows


def _ratio(value: int, reference: int) -> Optional[float]:
    """(F(q) - F(0)) / F(0); undefined (None) when F(0) = 0."""
    if reference == 0:
        return None
    return (value - reference) / reference


def sweep_f(base: ExperimentConfig, grid: Sequence[float], workers: int = 1) -> SweepResult:
    """
    Curve (a): heterogeneous crisis F per f. Curve (b): same draws with every
    bank at the average equity ratio. Curve (c): F(0) + f*N.
    """
    kind = base.topology.base
    if kind not in (TopologyKind.RANDOM_MIXING, TopologyKind.ASSET_CORRELATED):
        raise InvalidParameterError(f"f-sweep needs a mixing topology, got {base.topology.value}")
    base = replace(base, topology=kind, sweep_variable="f", grid=tuple(grid))
    base.validate()

    sweep = SweepResult("f")
    with SampleRunner(workers) as runner:
        values = list(grid) if 0.0 in grid else [0.0] + list(grid)
        results = {}
        for f in values:
            outcomes = runner.run(base.at(f), with_baseline=True)
            results[f] = (summarize(_heterogeneous(outcomes), base.total_banks),
                          summarize(_homogeneous(outcomes), base.total_banks))
            logger.info(f"f={f:g}: crisis F={results[f][0].crisis_F}, homogeneous baseline {results[f][1].crisis_F}")

    f_zero = results[0.0][0].crisis_F
    for f in grid:
        heterogeneous, homogeneous = results[f]
        sweep.points.append(SweepPoint(
            value=f,
            result=heterogeneous,
            baseline_b=homogeneous,
            baseline_c=f_zero + f * base.total_banks,
        ))
    return sweep


def sweep_q(base: ExperimentConfig, grid: Sequence[float], workers: int = 1) -> SweepResult:
    """R(q) = (F(q) - F(0)) / F(0) for the whole system and for each layer."""
    if base.topology is not TopologyKind.LAYERED:
        raise InvalidParameterError(f"q-sweep needs the layered topology, got {base.topology.value}")
    if 0.0 not in grid:
        raise InvalidParameterError("q grid must include q = 0")
    base = replace(base, sweep_variable="q", grid=tuple(grid))
    base.validate()

    results = {}
    with SampleRunner(workers) as runner:
        for q in grid:
            results[q] = run_ensemble(base.at(q), runner=runner)

    reference = results[0.0]
    sweep = SweepResult("q")
    for q in grid:
        result = results[q]
        sweep.points.append(SweepPoint(
            value=q,
            result=result,
            ratio_total=_ratio(result.crisis_F, reference.crisis_F),
            ratio_shadow=_ratio(result.crisis_F_shadow, reference.crisis_F_shadow),
            ratio_regulated=_ratio(result.crisis_F_regulated, reference.crisis_F_regulated),
        ))
    return sweep
