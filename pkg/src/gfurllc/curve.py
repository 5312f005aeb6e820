from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import Scheme, scheme_label


@dataclass
class FailureCurve:
    """Latent access failure probability sampled at T = 1..t_max TTIs."""

    scheme: Scheme
    t_ttis: np.ndarray
    p_fail: np.ndarray
    tti_ms: float = 0.125
    engine: str = "analytic"
    metadata: dict[str, Any] = field(default_factory=dict)
    # simulated curves only
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    n_samples: int | None = None

    @property
    def t_ms(self) -> np.ndarray:
        return self.t_ttis * self.tti_ms

    @property
    def label(self) -> str:
        return scheme_label(self.scheme)

    @property
    def points(self) -> list[tuple[int, float, float]]:
        return [(int(t), float(t * self.tti_ms), float(p)) for t, p in zip(self.t_ttis, self.p_fail)]

    def at(self, t: int) -> float:
        return float(self.p_fail[int(t) - 1])

    def sigma(self) -> np.ndarray:
        """Binomial standard error per point (simulated curves)."""
        if self.n_samples is None:
            raise ValueError("analytic curve has no sampling error")
        p = self.p_fail
        return np.sqrt(p * (1.0 - p) / self.n_samples)
