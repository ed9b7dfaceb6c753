#!/usr/bin/env python3
"""
Tests for balance-sheet synthesis and the homogeneous equity-ratio baseline.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add current directory to path
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from src.errors import InfeasibleBalanceSheetError, InvalidParameterError
from src.netgen import Topology, WeightedNetwork, assign_weights, generate_scale_free, mix_random
from src.balsheet import (BalanceSheet, BalanceSheets, SystemParams, average_gamma, check_identity,
                          homogenize, standalone, synthesize, total_assets)


def _single_loan(gamma: float = 0.1, theta: float = 0.5):
    adjacency = np.array([[False, True], [False, False]])
    topology = Topology.from_adjacency(adjacency)
    weights = np.array([[0.0, 1.0], [0.0, 0.0]])
    network = WeightedNetwork(topology, weights, 0.0, 1.0)
    return network, SystemParams(theta, gamma, gamma)


def _preset_network(seed: int = 2014, n_banks: int = 500):
    topology = mix_random(generate_scale_free(n_banks, 0.05, seed), 0.5, seed + 1)
    return assign_weights(topology, 0.25)


def test_isolated_bank():
    sheet = standalone(1.0, 0.1)
    assert sheet.assets == 1.0
    assert sheet.interbank_loans == 0.0
    assert sheet.external_assets == 1.0
    assert sheet.equity == pytest.approx(0.1)
    assert sheet.interbank_borrowings == 0.0
    assert sheet.deposits == pytest.approx(0.9)


def test_two_bank_loan():
    network, params = _single_loan()
    creditor, debtor = synthesize(network, params)

    assert creditor.interbank_loans == 1.0 and creditor.interbank_borrowings == 0.0
    assert creditor.external_assets == pytest.approx(1.0)
    assert creditor.assets == pytest.approx(2.0)
    assert creditor.equity == pytest.approx(0.2)
    assert creditor.deposits == pytest.approx(1.8)

    assert debtor.interbank_loans == 0.0 and debtor.interbank_borrowings == 1.0
    assert debtor.assets == pytest.approx(1 / 0.9)
    assert debtor.external_assets == pytest.approx(1 / 0.9)
    assert debtor.equity == pytest.approx(0.1 / 0.9)
    assert debtor.deposits == pytest.approx(0.0, abs=1e-12)


def test_identity_holds_for_preset_system():
    network = _preset_network()
    sheets = synthesize(network, SystemParams())
    check_identity(sheets)
    assert np.all(sheets.deposits >= 0)
    assert np.all(sheets.external_assets >= sheets.interbank_borrowings - sheets.interbank_loans - 1e-12)
    shadow = network.topology.shadow
    assert np.allclose(sheets.equity_ratio[shadow], 0.06)
    assert np.allclose(sheets.equity_ratio[~shadow], 0.1)


def test_realized_interbank_ratio():
    sheets = synthesize(_preset_network(), SystemParams())
    assert 0.27 <= sheets.realized_interbank_ratio <= 0.3 + 1e-12


def test_assets_do_not_depend_on_classes():
    network = _preset_network(seed=9, n_banks=200)
    relabelled = network.relabel(network.topology.with_classes(~network.topology.shadow))
    params = SystemParams()
    assert np.array_equal(total_assets(network, params), total_assets(relabelled, params))
    assert np.allclose(synthesize(network, params).assets, total_assets(network, params))


def test_scale_invariance():
    network = _preset_network(seed=3, n_banks=100)
    params = SystemParams()
    base = synthesize(network, params)
    scaled = synthesize(network.scaled(1000.0), params)
    assert np.allclose(scaled.assets, 1000.0 * base.assets)
    assert np.allclose(scaled.equity, 1000.0 * base.equity)


def test_average_gamma():
    assert average_gamma([standalone(1.0, 0.1)]) == pytest.approx(0.1)
    sheets = [BalanceSheet(10.0, 0.0, 10.0, 1.0, 0.0, 9.0, 0.1),
              BalanceSheet(10.0, 0.0, 10.0, 3.0, 0.0, 7.0, 0.3)]
    assert average_gamma(sheets) == pytest.approx(0.2)
    with pytest.raises(InvalidParameterError):
        average_gamma([])


def test_average_gamma_with_equal_class_assets():
    sheets = BalanceSheets.from_list([standalone(5.0, 0.06), standalone(5.0, 0.1)])
    assert average_gamma(sheets) == pytest.approx(0.08)


def test_homogenize_preserves_total_equity():
    sheets = synthesize(_preset_network(seed=5, n_banks=200), SystemParams())
    flat = homogenize(sheets)
    gamma_bar = average_gamma(sheets)
    assert flat.total_equity == pytest.approx(sheets.total_equity)
    assert np.allclose(flat.equity_ratio, gamma_bar)
    assert np.array_equal(flat.assets, sheets.assets)
    assert np.array_equal(flat.interbank_borrowings, sheets.interbank_borrowings)
    check_identity(flat)


def test_infeasible_parameters_are_rejected():
    network, _ = _single_loan()
    with pytest.raises(InfeasibleBalanceSheetError):
        synthesize(network, SystemParams(interbank_ratio=1.0))
    with pytest.raises(InfeasibleBalanceSheetError):
        synthesize(network, SystemParams(gamma_shadow=0.0))


def test_check_identity_flags_broken_sheet():
    broken = BalanceSheet(1.0, 0.0, 1.0, 0.1, 0.0, 0.5, 0.1)
    with pytest.raises(InfeasibleBalanceSheetError):
        check_identity([broken])


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
