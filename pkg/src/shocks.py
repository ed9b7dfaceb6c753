"""
External-asset shocks.
Samples investment portfolios and Student-t price fluctuations, and calibrates
the fluctuation amplitude so that a standalone bank with equity ratio gamma
fails with a target probability.
"""

import os
import json
import math
import logging
from dataclasses import dataclass, asdict
from datetime import datetime
from multiprocessing import Pool
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

try:
    from .errors import CalibrationError, InvalidParameterError
    from .balsheet import standalone
    from .netgen import Seed, as_seed_sequence
except ImportError:
    # Fallback for direct execution
    from errors import CalibrationError, InvalidParameterError
    from balsheet import standalone
    from netgen import Seed, as_seed_sequence

logger = logging.getLogger(__name__)

DEFAULT_DOF = 1.5
CALIBRATION_GAMMA = 0.07
CALIBRATION_P = 1e-3
CALIBRATION_TRIALS = 10 ** 7
CALIBRATION_SEED = 20140606
CHUNK_SIZE = 10 ** 6
MAX_ITERATIONS = 60
ACCEPTED_ERROR = 0.25


@dataclass(frozen=True)
class Portfolio:
    """allocation[n, m] is the fraction of bank n's external assets in asset class m."""
    allocation: np.ndarray

    @property
    def n_banks(self) -> int:
        return self.allocation.shape[0]

    @property
    def n_assets(self) -> int:
        return self.allocation.shape[1]


@dataclass(frozen=True)
class PriceShock:
    """Signed fractional price change per asset class (-0.2 is a 20% fall), clamped at -1."""
    relative_change: np.ndarray
    scale: float
    dof: float = DEFAULT_DOF

    @property
    def n_assets(self) -> int:
        return self.relative_change.shape[0]


def sample_portfolio(n_banks: int, n_assets: int, seed: Seed = None) -> Portfolio:
    """Uniform split for M=2, uniform point on the simplex for M>2."""
    if n_assets < 1:
        raise InvalidParameterError(f"Need at least one asset class, got {n_assets}")
    rng = np.random.default_rng(seed)
    if n_assets == 1:
        allocation = np.ones((n_banks, 1))
    elif n_assets == 2:
        first = rng.uniform(0.0, 1.0, size=n_banks)
        allocation = np.column_stack((first, 1.0 - first))
    else:
        allocation = rng.dirichlet(np.ones(n_assets), size=n_banks)
    return Portfolio(allocation)


def _check_shock_params(scale: float, dof: float):
    if scale <= 0:
        raise InvalidParameterError(f"Shock scale must be positive, got {scale}")
    if dof <= 0:
        raise InvalidParameterError(f"Degrees of freedom must be positive, got {dof}")


def sample_shock(n_assets: int, scale: float, dof: float = DEFAULT_DOF, seed: Seed = None) -> PriceShock:
    """Draw scale * T per asset class, T ~ Student-t(dof), clamped at a total loss of -1."""
    _check_shock_params(scale, dof)
    if n_assets < 1:
        raise InvalidParameterError(f"Need at least one asset class, got {n_assets}")
    rng = np.random.default_rng(seed)
    change = np.maximum(scale * rng.standard_t(dof, size=n_assets), -1.0)
    return PriceShock(change, float(scale), float(dof))


def no_shock(n_assets: int, dof: float = DEFAULT_DOF) -> PriceShock:
    return PriceShock(np.zeros(n_assets), 0.0, float(dof))


def portfolio_loss(external_assets, allocation: np.ndarray, relative_change: np.ndarray) -> np.ndarray:
    """Initial distress -e * sum_m X[m] * v[m]; negative values are gains."""
    return -np.asarray(external_assets) * (allocation * relative_change).sum(axis=-1)


def t_quantile(prob: float, dof: float = DEFAULT_DOF) -> float:
    return float(stats.t.ppf(prob, dof))


def _check_calibration_target(gamma: float, target_p: float):
    if not 0 < target_p < 0.5:
        raise InvalidParameterError(f"Target probability must lie in (0, 0.5), got {target_p}")
    if not 0 < gamma < 1:
        raise InvalidParameterError(f"Equity ratio must lie in (0, 1), got {gamma}")


def closed_form_scale(gamma: float = CALIBRATION_GAMMA, target_p: float = CALIBRATION_P,
                      dof: float = DEFAULT_DOF) -> float:
    """Exact single-asset amplitude: loss > gamma*a iff -s*T > gamma."""
    _check_calibration_target(gamma, target_p)
    return gamma / t_quantile(1.0 - target_p, dof)


def _count_failures(task: Tuple[np.random.SeedSequence, int, float, int, float, float]) -> int:
    chunk_seed, size, scale, n_assets, gamma, dof = task
    rng = np.random.default_rng(chunk_seed)
    allocation = sample_portfolio(size, n_assets, rng).allocation
    change = np.maximum(scale * rng.standard_t(dof, size=(size, n_assets)), -1.0)
    bank = standalone(1.0, gamma)
    loss = portfolio_loss(bank.external_assets, allocation, change)
    return int(np.count_nonzero(loss > bank.equity))


def _chunk_tasks(seed: Seed, trials: int, scale: float, n_assets: int, gamma: float, dof: float,
                 chunk_size: int) -> List[Tuple]:
    n_chunks = max(1, math.ceil(trials / chunk_size))
    seeds = as_seed_sequence(seed).spawn(n_chunks)
    sizes = [chunk_size] * (n_chunks - 1) + [trials - chunk_size * (n_chunks - 1)]
    return [(s, size, scale, n_assets, gamma, dof) for s, size in zip(seeds, sizes)]


def standalone_failure_probability(
    scale: float,
    n_assets: int,
    gamma: float = CALIBRATION_GAMMA,
    dof: float = DEFAULT_DOF,
    trials: int = CALIBRATION_TRIALS,
    seed: Seed = None,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
    pool: Optional[Pool] = None,
) -> float:
    """Monte Carlo probability that a bank with only external assets loses more than gamma*a."""
    _check_shock_params(scale, dof)
    if trials < 1:
        raise InvalidParameterError(f"Need at least one trial, got {trials}")
    tasks = _chunk_tasks(seed, trials, scale, n_assets, gamma, dof, chunk_size)
    if pool is not None:
        counts = pool.map(_count_failures, tasks)
    elif workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as own_pool:
            counts = own_pool.map(_count_failures, tasks)
    else:
        counts = [_count_failures(task) for task in tasks]
    return sum(counts) / trials


@dataclass(frozen=True)
class Calibration:
    scale: float
    estimated_p: float
    n_assets: int
    gamma: float
    target_p: float
    dof: float
    trials: int
    iterations: int


def calibrate(
    n_assets: int,
    gamma: float = CALIBRATION_GAMMA,
    target_p: float = CALIBRATION_P,
    dof: float = DEFAULT_DOF,
    trials: int = CALIBRATION_TRIALS,
    seed: Seed = CALIBRATION_SEED,
    workers: int = 1,
    max_iterations: int = MAX_ITERATIONS,
) -> Calibration:
    """
    Bisect on log(s) until the standalone failure probability matches target_p.

    Every evaluation reuses the same seed streams, so the estimate varies with s
    only through the shock amplitude.
    """
    _check_calibration_target(gamma, target_p)
    if n_assets < 1:
        raise InvalidParameterError(f"Need at least one asset class, got {n_assets}")
    if trials * target_p < 100:
        logger.warning(f"Only {trials * target_p:.0f} expected failures per evaluation; estimate will be noisy")

    pool = Pool(processes=workers) if workers > 1 else None
    try:
        def estimate(scale: float) -> float:
            return standalone_failure_probability(scale, n_assets, gamma, dof, trials, seed, pool=pool)

        guess = closed_form_scale(gamma, target_p, dof)
        lo, hi = guess / 8, guess * 8
        for _ in range(10):
            if estimate(lo) <= target_p:
                break
            lo /= 8
        for _ in range(10):
            if estimate(hi) >= target_p:
                break
            hi *= 8

        iterations = 0
        scale, p_hat = guess, estimate(guess)
        while abs(p_hat - target_p) > 0.005 * target_p and hi / lo > 1 + 1e-6:
            if iterations >= max_iterations:
                break
            iterations += 1
            if p_hat < target_p:
                lo = scale
            else:
                hi = scale
            scale = math.sqrt(lo * hi)
            p_hat = estimate(scale)
            logger.debug(f"Calibration step {iterations}: s={scale:.6g}, p={p_hat:.3e}")
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    if abs(p_hat - target_p) > ACCEPTED_ERROR * target_p:
        raise CalibrationError(
            f"No convergence after {iterations} iterations: s={scale:.6g} gives p={p_hat:.3e}, target {target_p:.3e}")

    logger.info(f"Calibrated shock scale s={scale:.6g} for M={n_assets}, gamma={gamma}, "
                f"p={target_p} (estimate {p_hat:.3e}, {iterations} iterations)")
    return Calibration(scale, p_hat, n_assets, gamma, target_p, dof, trials, iterations)


def calibrate_amplitude(n_assets: int, gamma: float = CALIBRATION_GAMMA, target_p: float = CALIBRATION_P,
                        **kwargs) -> float:
    return calibrate(n_assets, gamma, target_p, **kwargs).scale


class CalibrationCache:
    """Calibrated scales stored in a small JSON file keyed by (M, gamma, p, dof)."""

    def __init__(self, cache_dir: str):
        self.cache_dir = cache_dir
        os.makedirs(self.cache_dir, exist_ok=True)
        self.cache_file = os.path.join(self.cache_dir, "calibration.json")

    @staticmethod
    def key(n_assets: int, gamma: float, target_p: float, dof: float) -> str:
        return f"M={n_assets};gamma={gamma:g};p={target_p:g};dof={dof:g}"

    def _load(self) -> Dict:
        try:
            if os.path.exists(self.cache_file):
                with open(self.cache_file, 'r', encoding='utf-8') as f:
                    return json.load(f)
            return {}
        except Exception as e:
            logger.error(f"Error loading calibration cache: {e}")
            return {}

    def _save(self, entries: Dict):
        with open(self.cache_file, 'w', encoding='utf-8') as f:
            json.dump(entries, f, indent=2, sort_keys=True)

    def get(self, n_assets: int, gamma: float, target_p: float, dof: float) -> Optional[Calibration]:
        entry = self._load().get(self.key(n_assets, gamma, target_p, dof))
        if entry is None:
            return None
        entry = dict(entry)
        entry.pop("calibrated_at", None)
        return Calibration(**entry)

    def put(self, calibration: Calibration):
        entries = self._load()
        key = self.key(calibration.n_assets, calibration.gamma, calibration.target_p, calibration.dof)
        entries[key] = {**asdict(calibration), "calibrated_at": datetime.now().isoformat()}
        self._save(entries)
        logger.info(f"Cached calibration {key} in {self.cache_file}")

    def get_or_calibrate(self, n_assets: int, gamma: float = CALIBRATION_GAMMA, target_p: float = CALIBRATION_P,
                         dof: float = DEFAULT_DOF, **kwargs) -> Tuple[Calibration, bool]:
        """Return (calibration, cache_hit)."""
        _check_calibration_target(gamma, target_p)
        cached = self.get(n_assets, gamma, target_p, dof)
        if cached is not None:
            logger.info(f"Calibration cache hit: s={cached.scale:.6g}")
            return cached, True
        calibration = calibrate(n_assets, gamma, target_p, dof, **kwargs)
        self.put(calibration)
        return calibration, False
