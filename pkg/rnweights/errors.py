"""
Exception hierarchy shared by every module.
"""

from typing import Any, Dict, Optional


class RadonNikodymError(Exception):
    """Base class for all errors raised by rnweights"""


class InvalidArgumentError(RadonNikodymError, ValueError):
    """Input violates an operation's precondition"""


class NumericalFailure(RadonNikodymError, ArithmeticError):
    """A numerical guard tripped (quadrature budget, conditioning, branch safety)"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ModeViolation(RadonNikodymError):
    """Exact mode requested for a pair that finite-dimensional rigidity rules out"""


class ScenarioError(RadonNikodymError):
    """Scenario file could not be parsed or validated"""

    def __init__(self, message: str, location: Optional[str] = None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
