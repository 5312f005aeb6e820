"""Latent access failure probability of grant-free URLLC under Reactive,
K-repetition and Proactive HARQ: closed-form engine and Monte-Carlo simulator."""
from .analytic import failure_curve
from .config import KRepetition, Proactive, Reactive, ScenarioConfig, baseline, load_scenario
from .curve import FailureCurve
from .simulator import estimate_failure_curve

__version__ = "0.1.0"

__all__ = [
    "FailureCurve",
    "KRepetition",
    "Proactive",
    "Reactive",
    "ScenarioConfig",
    "baseline",
    "estimate_failure_curve",
    "failure_curve",
    "load_scenario",
]
