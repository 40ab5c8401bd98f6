"""Result containers shared by the analytic and simulation layers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable


@dataclass(frozen=True)
class LawResult:
    """Value of a probability or Laplace transform with an error estimate.

    ``method`` is one of ``"closed-form"``, ``"quadrature"``, ``"inversion"`` or
    ``"mc"``; ``diagnostics`` holds route tags, truncation points, panel counts and
    the like.
    """

    value: float
    error: float = 0.0
    method: str = "quadrature"
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class Density:
    """Sub-probability density on ``support`` with total mass ``mass``."""

    support: tuple
    pdf: Callable
    mass: float
