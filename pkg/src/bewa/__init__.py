"""Belief-graph engine for scientific claims with a tamper-evident ledger."""

from .engine import Engine
from .errors import BewaError, UnknownClaim

__version__ = "0.1.0"

__all__ = ["Engine", "BewaError", "UnknownClaim", "__version__"]
