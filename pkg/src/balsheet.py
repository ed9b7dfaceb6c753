"""
Balance-sheet synthesis.
Turns a weighted interbank network and (theta, gamma_s, gamma_r) into per-bank
balance sheets a = l + e = c + b + d that meet the solvency prerequisite.
"""

import logging
from dataclasses import dataclass, fields
from typing import Iterator, List, Sequence, Union

import numpy as np

try:
    from .errors import InfeasibleBalanceSheetError, InvalidParameterError
    from .netgen import WeightedNetwork
except ImportError:
    # Fallback for direct execution
    from errors import InfeasibleBalanceSheetError, InvalidParameterError
    from netgen import WeightedNetwork

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SystemParams:
    interbank_ratio: float = 0.3
    gamma_shadow: float = 0.06
    gamma_regulated: float = 0.1

    @property
    def gamma_max(self) -> float:
        return max(self.gamma_shadow, self.gamma_regulated)

    def validate(self):
        if not 0 < self.interbank_ratio < 1:
            raise InfeasibleBalanceSheetError(
                f"Interbank ratio theta must lie in (0, 1), got {self.interbank_ratio}")
        for name in ("gamma_shadow", "gamma_regulated"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise InfeasibleBalanceSheetError(f"{name} must lie in (0, 1), got {value}")

    def gammas(self, shadow: np.ndarray) -> np.ndarray:
        return np.where(shadow, self.gamma_shadow, self.gamma_regulated)


@dataclass(frozen=True)
class BalanceSheet:
    assets: float
    interbank_loans: float
    external_assets: float
    equity: float
    interbank_borrowings: float
    deposits: float
    equity_ratio: float


@dataclass(frozen=True)
class BalanceSheets:
    """
    Balance sheets of a whole system as parallel arrays.

    Behaves like a list of BalanceSheet (len, indexing, iteration) while the
    cascade works directly on the arrays.
    """
    assets: np.ndarray
    interbank_loans: np.ndarray
    external_assets: np.ndarray
    equity: np.ndarray
    interbank_borrowings: np.ndarray
    deposits: np.ndarray
    equity_ratio: np.ndarray

    @classmethod
    def from_list(cls, sheets: Sequence[BalanceSheet]) -> "BalanceSheets":
        names = [f.name for f in fields(BalanceSheet)]
        return cls(**{name: np.array([getattr(s, name) for s in sheets], dtype=float) for name in names})

    def __len__(self) -> int:
        return self.assets.shape[0]

    def __getitem__(self, index: int) -> BalanceSheet:
        return BalanceSheet(**{f.name: float(getattr(self, f.name)[index]) for f in fields(self)})

    def __iter__(self) -> Iterator[BalanceSheet]:
        return (self[i] for i in range(len(self)))

    @property
    def realized_interbank_ratio(self) -> float:
        total = self.assets.sum()
        return float(self.interbank_loans.sum() / total) if total > 0 else 0.0

    @property
    def total_equity(self) -> float:
        return float(self.equity.sum())


SheetsLike = Union[BalanceSheets, List[BalanceSheet]]


def as_sheets(sheets: SheetsLike) -> BalanceSheets:
    return sheets if isinstance(sheets, BalanceSheets) else BalanceSheets.from_list(sheets)


def _external_assets(loans: np.ndarray, borrowings: np.ndarray, params: SystemParams) -> np.ndarray:
    theta = params.interbank_ratio
    baseline = loans * (1 - theta) / theta
    # a >= b / (1 - gamma_max) keeps deposits non-negative for every class and for gamma-bar
    deposit_floor = borrowings / (1 - params.gamma_max) - loans
    solvency_floor = borrowings - loans
    return np.maximum.reduce([baseline, deposit_floor, solvency_floor, np.zeros_like(loans)])


def total_assets(network: WeightedNetwork, params: SystemParams) -> np.ndarray:
    """Per-bank total assets; independent of the shadow/regulated labels."""
    params.validate()
    loans = network.loans
    return loans + _external_assets(loans, network.borrowings, params)


def synthesize(network: WeightedNetwork, params: SystemParams) -> BalanceSheets:
    """
    Build balance sheets: l and b from the loan matrix, e anchored at
    l*(1-theta)/theta and raised where needed for e >= b - l and d >= 0,
    c = gamma*a with gamma chosen by bank class, d = a - c - b.
    """
    params.validate()
    loans = network.loans
    borrowings = network.borrowings
    external = _external_assets(loans, borrowings, params)
    assets = loans + external
    gamma = params.gammas(network.topology.shadow)
    equity = gamma * assets
    deposits = np.maximum(assets - equity - borrowings, 0.0)

    sheets = BalanceSheets(
        assets=assets,
        interbank_loans=loans,
        external_assets=external,
        equity=equity,
        interbank_borrowings=borrowings,
        deposits=deposits,
        equity_ratio=gamma,
    )
    raised = int(np.count_nonzero(external > loans * (1 - params.interbank_ratio) / params.interbank_ratio))
    logger.debug(f"Synthesized {len(sheets)} balance sheets, {raised} raised above the theta anchor, "
                 f"realized theta={sheets.realized_interbank_ratio:.4f}")
    return sheets


def standalone(external_assets: float, gamma: float) -> BalanceSheet:
    """A bank with no interbank positions: a = e, c = gamma*a."""
    if not 0 < gamma < 1:
        raise InfeasibleBalanceSheetError(f"Equity ratio must lie in (0, 1), got {gamma}")
    equity = gamma * external_assets
    return BalanceSheet(
        assets=external_assets,
        interbank_loans=0.0,
        external_assets=external_assets,
        equity=equity,
        interbank_borrowings=0.0,
        deposits=external_assets - equity,
        equity_ratio=gamma,
    )


def average_gamma(sheets: SheetsLike) -> float:
    """System-wide equity ratio sum(c) / sum(a)."""
    sheets = as_sheets(sheets)
    if len(sheets) == 0:
        raise InvalidParameterError("Cannot average the equity ratio of an empty system")
    total = sheets.assets.sum()
    if total <= 0:
        raise InvalidParameterError("System has no assets")
    return float(sheets.equity.sum() / total)


def homogenize(sheets: SheetsLike) -> BalanceSheets:
    """Give every bank the average equity ratio; a, l, e, b and total equity stay fixed."""
    sheets = as_sheets(sheets)
    gamma_bar = average_gamma(sheets)
    equity = gamma_bar * sheets.assets
    deposits = sheets.assets - equity - sheets.interbank_borrowings
    if np.any(deposits < -IDENTITY_TOLERANCE * np.maximum(sheets.assets, 1e-300)):
        raise InfeasibleBalanceSheetError(f"Average equity ratio {gamma_bar:.4f} leaves negative deposits")
    return BalanceSheets(
        assets=sheets.assets,
        interbank_loans=sheets.interbank_loans,
        external_assets=sheets.external_assets,
        equity=equity,
        interbank_borrowings=sheets.interbank_borrowings,
        deposits=np.maximum(deposits, 0.0),
        equity_ratio=np.full(len(sheets), gamma_bar),
    )


def check_identity(sheets: SheetsLike, rel_tol: float = IDENTITY_TOLERANCE):
    """Raise InfeasibleBalanceSheetError if any sheet breaks an accounting invariant."""
    s = as_sheets(sheets)
    scale = np.maximum(np.abs(s.assets), 1e-300)
    checks = {
        "a = l + e": np.abs(s.assets - s.interbank_loans - s.external_assets) <= rel_tol * scale,
        "a = c + b + d": np.abs(s.assets - s.equity - s.interbank_borrowings - s.deposits) <= rel_tol * scale,
        "e >= b - l": s.external_assets >= s.interbank_borrowings - s.interbank_loans - rel_tol * scale,
        "c = gamma * a": np.abs(s.equity - s.equity_ratio * s.assets) <= rel_tol * scale,
        "d >= 0": s.deposits >= -rel_tol * scale,
    }
    for name, ok in checks.items():
        if not np.all(ok):
            bad = int(np.flatnonzero(~ok)[0])
            raise InfeasibleBalanceSheetError(f"Bank {bad} violates {name}")
