"""
Exception types raised by the simulator modules.
The orchestrator turns these into status dictionaries for the CLI.
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidParameterError(SimulationError, ValueError):
    """A parameter is outside its documented range."""


class UnreachableConcentrationError(SimulationError):
    """No weight exponent r in [0, r_cap] reaches the target concentration."""

    def __init__(self, target: float, lowest: float, highest: float):
        self.target = target
        self.lowest = lowest
        self.highest = highest
        super().__init__(
            f"Concentration {target:.4f} unreachable: "
            f"achievable range is [{lowest:.4f}, {highest:.4f}]"
        )


class InfeasibleBalanceSheetError(SimulationError):
    """Balance sheets cannot satisfy the accounting identity or solvency prerequisite."""


class CalibrationError(SimulationError):
    """Shock amplitude calibration failed to converge."""


class ConfigError(SimulationError):
    """Experiment configuration is malformed or names an unknown key."""


class ResultFormatError(SimulationError):
    """A result CSV does not follow the ensemble output schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
