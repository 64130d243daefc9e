"""Gain and phase margin limits for PID control of low-order unstable plants."""
from .errors import MarginLabError
from .plant import (
    ComplexPoles,
    FirstOrder,
    Gain,
    PidGains,
    Phase,
    RealPoles,
    SecondOrderMinPhase,
    SecondOrderZero,
    closed_loop_charpoly,
)
from .margins import MarginReport, margins_for, lti_optimal_margins
from .oracle import OracleConfig, gain_margin_of, phase_margin_of, best_margin_search

__version__ = "0.1.0"

__all__ = [
    "MarginLabError", "ComplexPoles", "FirstOrder", "Gain", "PidGains", "Phase",
    "RealPoles", "SecondOrderMinPhase", "SecondOrderZero", "closed_loop_charpoly",
    "MarginReport", "margins_for", "lti_optimal_margins", "OracleConfig",
    "gain_margin_of", "phase_margin_of", "best_margin_search",
]

import logging as _logging

_logging.getLogger(__name__).addHandler(_logging.NullHandler())
