"""Aggregate founder-suitability score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputOutOfRange

# below this idea*fit product the exponent is astronomically large; short-circuit
_MIN_PRODUCT = 1e-300


def _check(name: str, x: float) -> float:
    x = float(x)
    if not (math.isfinite(x) and 0.0 <= x <= 1.0):
        raise InputOutOfRange(f"{name} score must lie in [0, 1], got {x!r}")
    return x


def aggregate(founder: float, idea: float, fit: float) -> float:
    """founder ** (1 / (2 * fit * idea)), zero if any input is zero."""
    founder = _check("founder", founder)
    idea = _check("idea", idea)
    fit = _check("fit", fit)
    if founder == 0.0 or idea == 0.0 or fit == 0.0:
        return 0.0
    if founder == 1.0:
        return 1.0
    product = 2.0 * fit * idea
    if product < _MIN_PRODUCT:
        return 0.0
    return founder ** (1.0 / product)


def aggregate_array(founder, idea, fit) -> np.ndarray:
    """Vectorized ``aggregate`` over broadcastable arrays."""
    f, i, t = np.broadcast_arrays(np.asarray(founder, np.float64), np.asarray(idea, np.float64),
                                  np.asarray(fit, np.float64))
    for name, a in (("founder", f), ("idea", i), ("fit", t)):
        if not np.all(np.isfinite(a) & (a >= 0.0) & (a <= 1.0)):
            raise InputOutOfRange(f"{name} scores must lie in [0, 1]")
    product = 2.0 * t * i
    zero_input = (f == 0.0) | (i == 0.0) | (t == 0.0)
    tiny = product < _MIN_PRODUCT
    safe = ~(zero_input | tiny)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        out = np.power(np.where(safe, f, 0.5), 1.0 / np.where(safe, product, 1.0))
    out = np.where(safe, out, 0.0)
    return np.where((f == 1.0) & ~zero_input, 1.0, out)


def formula_edge(founder: float, idea: float, fit: float) -> bool:
    """A near-perfect founder dominates even a near-worthless idea/fit."""
    return founder >= 0.99 and idea * fit <= 0.1 and idea > 0 and fit > 0


@dataclass(frozen=True)
class EvaluationScores:
    founder: float
    idea: float
    fit: float
    aggregate: float

    @classmethod
    def combine(cls, founder: float, idea: float, fit: float) -> "EvaluationScores":
        return cls(founder, idea, fit, aggregate(founder, idea, fit))

    def to_dict(self) -> dict:
        return {"founder": self.founder, "idea": self.idea, "fit": self.fit, "aggregate": self.aggregate}
