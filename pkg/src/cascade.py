"""
Zero-recovery default cascade.
"""

import logging
from dataclasses import dataclass

import numpy as np

try:
    from .errors import InvalidParameterError
    from .balsheet import BalanceSheets, SheetsLike, as_sheets
    from .netgen import WeightedNetwork
    from .shocks import Portfolio, PriceShock, portfolio_loss
except ImportError:
    # Fallback for direct execution
    from errors import InvalidParameterError
    from balsheet import BalanceSheets, SheetsLike, as_sheets
    from netgen import WeightedNetwork
    from shocks import Portfolio, PriceShock, portfolio_loss

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 12


@dataclass(frozen=True)
class CascadeOutcome:
    failed: np.ndarray
    failure_round: np.ndarray
    F: int
    F_shadow: int
    F_regulated: int
    rounds: int

    @classmethod
    def from_failures(cls, failure_round: np.ndarray, shadow: np.ndarray) -> "CascadeOutcome":
        failed = failure_round >= 0
        f_shadow = int(np.count_nonzero(failed & shadow))
        f_total = int(np.count_nonzero(failed))
        return cls(
            failed=failed,
            failure_round=failure_round,
            F=f_total,
            F_shadow=f_shadow,
            F_regulated=f_total - f_shadow,
            rounds=int(failure_round.max()) if f_total else 0,
        )


def _check_dimensions(sheets: BalanceSheets, network: WeightedNetwork, portfolio: Portfolio, shock: PriceShock):
    n = network.n_banks
    if len(sheets) != n:
        raise InvalidParameterError(f"{len(sheets)} balance sheets for {n} banks")
    if portfolio.n_banks != n:
        raise InvalidParameterError(f"Portfolio has {portfolio.n_banks} rows for {n} banks")
    if portfolio.n_assets != shock.n_assets:
        raise InvalidParameterError(
            f"Portfolio covers {portfolio.n_assets} asset classes, shock covers {shock.n_assets}")


def initial_losses(sheets: SheetsLike, portfolio: Portfolio, shock: PriceShock) -> np.ndarray:
    """Round-0 loss of every bank from its own external-asset portfolio."""
    sheets = as_sheets(sheets)
    return portfolio_loss(sheets.external_assets, portfolio.allocation, shock.relative_change)


def run_cascade(sheets: SheetsLike, network: WeightedNetwork, portfolio: Portfolio,
                shock: PriceShock) -> CascadeOutcome:
    """
    Fail every bank whose loss exceeds its equity, then charge each creditor the
    full loan it made to every newly failed debtor, until no bank fails.
    """
    sheets = as_sheets(sheets)
    _check_dimensions(sheets, network, portfolio, shock)

    loss = initial_losses(sheets, portfolio, shock)
    capital = sheets.equity
    failure_round = np.full(network.n_banks, -1, dtype=int)

    newly = loss > capital
    round_index = 0
    while newly.any():
        failure_round[newly] = round_index
        round_index += 1
        loss = loss + network.weights[:, newly].sum(axis=1)
        newly = (failure_round < 0) & (loss > capital)

    outcome = CascadeOutcome.from_failures(failure_round, network.topology.shadow)
    logger.debug(f"Cascade: F={outcome.F} (shadow {outcome.F_shadow}), rounds={outcome.rounds}")
    return outcome


def brute_force_fixed_point(sheets: SheetsLike, network: WeightedNetwork, portfolio: Portfolio,
                            shock: PriceShock) -> CascadeOutcome:
    """
    Enumerate all 2**N failure sets and return the smallest self-consistent one:
    every member's loss given the set exceeds its capital and no outsider's does.
    """
    sheets = as_sheets(sheets)
    _check_dimensions(sheets, network, portfolio, shock)
    n = network.n_banks
    if n > BRUTE_FORCE_LIMIT:
        raise InvalidParameterError(f"Brute force supports at most {BRUTE_FORCE_LIMIT} banks, got {n}")

    own = initial_losses(sheets, portfolio, shock)
    capital = sheets.equity
    candidates = ((np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    losses = own[None, :] + candidates.astype(float) @ network.weights.T
    consistent = np.all((losses > capital[None, :]) == candidates, axis=1)
    sizes = np.where(consistent, candidates.sum(axis=1), n + 1)
    failed = candidates[int(np.argmin(sizes))]

    # Round of each failure: shortest chain of debtor defaults inside the set
    failure_round = np.full(n, -1, dtype=int)
    failure_round[failed & (own > capital)] = 0
    for round_index in range(1, n + 1):
        settled = failure_round >= 0
        loss = own + network.weights @ settled.astype(float)
        reached = failed & ~settled & (loss > capital)
        if not reached.any():
            break
        failure_round[reached] = round_index

    return CascadeOutcome.from_failures(failure_round, network.topology.shadow)
