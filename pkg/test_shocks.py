#!/usr/bin/env python3
"""
Tests for portfolios, Student-t price shocks and amplitude calibration.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

# Add current directory to path
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from src.errors import InvalidParameterError
from src.balsheet import standalone
from src.shocks import (Calibration, CalibrationCache, calibrate, calibrate_amplitude, closed_form_scale,
                        portfolio_loss, sample_portfolio, sample_shock, standalone_failure_probability,
                        t_quantile)


def test_single_asset_portfolio():
    portfolio = sample_portfolio(10, 1, seed=1)
    assert portfolio.allocation.shape == (10, 1)
    assert np.all(portfolio.allocation == 1.0)


def test_two_asset_portfolio():
    allocation = sample_portfolio(100_000, 2, seed=2).allocation
    assert np.allclose(allocation.sum(axis=1), 1.0)
    assert 0.49 <= allocation[:, 0].mean() <= 0.51


def test_three_asset_portfolio():
    allocation = sample_portfolio(100_000, 3, seed=3).allocation
    assert np.allclose(allocation.sum(axis=1), 1.0)
    assert np.all(np.abs(allocation.mean(axis=0) - 1 / 3) <= 0.01)


def test_portfolio_rejects_no_assets():
    with pytest.raises(InvalidParameterError):
        sample_portfolio(5, 0, seed=1)


def test_shock_median_matches_t_distribution():
    draws = sample_shock(1_000_000, 0.01, 1.5, seed=21).relative_change
    # median of |T| is the 0.75 quantile of T
    expected = 0.01 * stats.t.ppf(0.75, 1.5)
    assert np.median(np.abs(draws)) == pytest.approx(expected, rel=0.02)


def test_shock_sign_symmetry():
    draws = sample_shock(1_000_000, 0.01, 1.5, seed=22).relative_change
    assert 0.498 <= np.mean(draws > 0) <= 0.502


def test_shock_tail_decays_like_power_law():
    scale = 0.01
    magnitude = np.abs(sample_shock(1_000_000, scale, 1.5, seed=23).relative_change)
    beyond_5 = np.mean(magnitude > 5 * scale)
    beyond_10 = np.mean(magnitude > 10 * scale)
    # survival ~ x**-1.5 for dof 1.5
    exponent = np.log(beyond_5 / beyond_10) / np.log(2.0)
    assert 1.2 <= exponent <= 1.8


def test_shock_is_clamped_and_deterministic():
    a = sample_shock(1000, 5.0, 1.5, seed=99)
    b = sample_shock(1000, 5.0, 1.5, seed=99)
    assert np.array_equal(a.relative_change, b.relative_change)
    assert a.relative_change.min() >= -1.0


def test_tiny_scale_has_no_fluctuation():
    shock = sample_shock(4, 1e-12, 1.5, seed=5)
    assert np.allclose(shock.relative_change, 0.0, atol=1e-6)


def test_shock_rejects_bad_parameters():
    with pytest.raises(InvalidParameterError):
        sample_shock(2, 0.0, 1.5, seed=1)
    with pytest.raises(InvalidParameterError):
        sample_shock(2, 0.1, 0.0, seed=1)


def test_portfolio_loss_sign():
    bank = standalone(2.0, 0.07)
    allocation = np.array([[0.25, 0.75]])
    loss = portfolio_loss(bank.external_assets, allocation, np.array([-0.1, 0.0]))
    assert loss[0] == pytest.approx(0.05)


def test_closed_form_scale():
    expected = 0.07 / stats.t.ppf(0.999, 1.5)
    assert closed_form_scale(0.07, 1e-3, 1.5) == pytest.approx(expected)
    assert t_quantile(0.5, 1.5) == pytest.approx(0.0, abs=1e-12)


def test_calibration_rejects_half_probability():
    with pytest.raises(InvalidParameterError):
        closed_form_scale(0.07, 0.5)
    with pytest.raises(InvalidParameterError):
        calibrate(1, 0.07, 0.6, trials=1000)


def test_single_asset_calibration_matches_closed_form():
    scale = calibrate_amplitude(1, 0.07, 1e-3, trials=2_000_000, seed=11)
    assert scale == pytest.approx(closed_form_scale(0.07, 1e-3, 1.5), rel=0.05)


def test_two_asset_calibration_reaches_target():
    calibration = calibrate(2, 0.07, 1e-3, trials=1_000_000, seed=12)
    fresh = standalone_failure_probability(calibration.scale, 2, 0.07, trials=1_000_000, seed=13)
    assert 0.5e-3 <= fresh <= 2e-3


def test_failure_probability_is_reproducible_across_workers():
    serial = standalone_failure_probability(0.01, 2, trials=40_000, seed=3, chunk_size=10_000)
    pooled = standalone_failure_probability(0.01, 2, trials=40_000, seed=3, chunk_size=10_000, workers=2)
    assert serial == pooled


def test_calibration_cache_hit():
    with tempfile.TemporaryDirectory() as cache_dir:
        cache = CalibrationCache(cache_dir)
        stored = Calibration(0.0123, 1e-3, 2, 0.07, 1e-3, 1.5, 10 ** 7, 14)
        cache.put(stored)

        reopened = CalibrationCache(cache_dir)
        calibration, hit = reopened.get_or_calibrate(2, 0.07, 1e-3, 1.5)
        assert hit
        assert calibration == stored
        assert reopened.get(3, 0.07, 1e-3, 1.5) is None


def main():
    """Run the tests without pytest."""
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and callable(v)]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"✅ {test.__name__}")
        except Exception as e:
            failed += 1
            print(f"❌ {test.__name__}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} tests passed")
    return failed == 0


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
