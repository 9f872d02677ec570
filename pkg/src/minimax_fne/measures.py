"""First-order Nash equilibrium measures for the min player (X) and max player (Y)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError, NumericError
from .geometry import linear_min_local

__all__ = ["StationarityReport", "x_measure", "y_measure", "stationarity", "is_eps_fne"]


@dataclass(frozen=True)
class StationarityReport:
    x_measure: float
    y_measure: float
    point_theta: Optional[np.ndarray] = None
    point_alpha: Optional[np.ndarray] = None

    @property
    def worst(self) -> float:
        return max(self.x_measure, self.y_measure)


def _finite(g, which):
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NumericError(f"oracle returned a non-finite {which} gradient")
    return g


def x_measure(problem, theta, alpha) -> float:
    """Largest first-order decrease of f available to the min player within a unit step."""
    g = _finite(problem.grad_theta(theta, alpha), "theta")
    value = linear_min_local(problem.theta_set, theta, g).value
    return max(-value, 0.0) + 0.0  # normalise -0.0


def y_measure(problem, theta, alpha) -> float:
    """Largest first-order increase of f available to the max player within a unit step."""
    g = _finite(problem.grad_alpha(theta, alpha), "alpha")
    value = linear_min_local(problem.alpha_set, alpha, -g).value
    return max(-value, 0.0) + 0.0  # normalise -0.0


def stationarity(problem, theta, alpha) -> StationarityReport:
    theta = np.asarray(theta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return StationarityReport(
        x_measure(problem, theta, alpha),
        y_measure(problem, theta, alpha),
        theta,
        alpha,
    )


def is_eps_fne(report: StationarityReport, eps: float) -> bool:
    if not eps > 0:
        raise InvalidInputError(f"eps must be positive, got {eps}")
    return report.x_measure <= eps and report.y_measure <= eps
