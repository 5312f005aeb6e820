"""Latency bookkeeping in integer TTIs.

Frame alignment, transmission, BS processing, feedback and UE processing
each take one TTI.
"""
from __future__ import annotations

from dataclasses import dataclass

from .config import KRepetition, Proactive, Reactive, Scheme

T_FA = T_TX = T_DP = T_FB = T_UP = 1


@dataclass(frozen=True)
class LatencyBudget:
    t_ttis: int
    tti_ms: float = 0.125

    def __post_init__(self):
        if int(self.t_ttis) != self.t_ttis or self.t_ttis < 1:
            raise ValueError(f"latency budget must be >= 1 TTI, got {self.t_ttis!r}")

    @property
    def t_ms(self) -> float:
        return self.t_ttis * self.tti_ms


def _budget(budget: LatencyBudget | int) -> int:
    return budget.t_ttis if isinstance(budget, LatencyBudget) else LatencyBudget(budget).t_ttis


def rtt(scheme: Scheme, l: int = 0) -> int:
    """HARQ round-trip time. For Proactive, ``l`` is the repetition that
    succeeded (``l = 0``: none did, the full round elapses)."""
    if isinstance(scheme, Reactive):
        return T_TX + T_DP + T_FB + T_UP
    if isinstance(scheme, KRepetition):
        return scheme.k * T_TX + T_DP + T_FB + T_UP
    if isinstance(scheme, Proactive):
        if l == 0:
            return scheme.k_max + 3
        if not 1 <= l <= scheme.k_max:
            raise ValueError(f"repetition index {l} outside 0..{scheme.k_max}")
        return l + 3
    raise TypeError(f"not a scheme: {scheme!r}")


def latency_after(scheme: Scheme, m: int, l: int = 0) -> int:
    """Latency in TTIs when access completes in round ``m`` (repetition ``l``
    for Proactive; ``l = 0`` means round ``m`` ran to the end)."""
    if m < 1:
        raise ValueError(f"round count must be >= 1, got {m}")
    if isinstance(scheme, Proactive):
        return T_FA + (m - 1) * rtt(scheme, 0) + rtt(scheme, l)
    return T_FA + m * rtt(scheme)


def max_rounds(scheme: Scheme, budget: LatencyBudget | int) -> int:
    """Number of complete HARQ round trips that fit in the budget."""
    if isinstance(scheme, Proactive):
        raise TypeError("Proactive uses proactive_indices")
    return (_budget(budget) - 1) // rtt(scheme)


def proactive_indices(k_max: int, budget: LatencyBudget | int) -> tuple[int, int]:
    """``(mu, nu)``: complete rounds and TTI offset into the next one.

    ``T = 1`` would give a negative offset; it is mapped to ``(0, 0)``, which
    falls in the failure-certain region like every ``nu <= 2`` with ``mu = 0``.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    t = _budget(budget)
    if t == 1:
        return 0, 0
    return divmod(t - 2, k_max + 3)
