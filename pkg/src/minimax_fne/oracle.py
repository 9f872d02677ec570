"""Problem oracle, trajectory records and the theory constants shared by both solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, NumericError
from .geometry import FeasibleSet

__all__ = ["ProblemOracle", "Record", "Trajectory", "RateConstants"]

Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class ProblemOracle:
    """A smooth game ``min_theta max_alpha f(theta, alpha)``.

    ``l11``, ``l12`` and ``l22`` are Lipschitz constants of the partial
    gradients (theta-theta, mixed, alpha-alpha). ``mu`` is the PL constant of
    ``-f(theta, .)`` when the inner problem is known to satisfy it.

    ``inner_argmax(theta, lam, alpha_bar)``, when provided, returns the exact
    maximizer of ``f(theta, a) - lam/2 ||a - alpha_bar||^2`` over the alpha set.
    ``value(theta)``, when provided, returns ``max_alpha f(theta, alpha)``.
    ``extras`` carries problem-specific helpers (datasets, optimal-set maps).
    """

    f: Callable[[Vector, Vector], float]
    grad_theta: Callable[[Vector, Vector], Vector]
    grad_alpha: Callable[[Vector, Vector], Vector]
    theta_set: FeasibleSet
    alpha_set: FeasibleSet
    l11: float
    l12: float
    l22: float
    mu: Optional[float] = None
    name: str = "custom"
    inner_argmax: Optional[Callable] = None
    value: Optional[Callable[[Vector], float]] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in ("l11", "l12", "l22"):
            v = getattr(self, key)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidInputError(f"{key} must be finite and nonnegative, got {v}")
        if self.mu is not None and not self.mu > 0:
            raise InvalidInputError(f"mu must be positive when given, got {self.mu}")

    @property
    def theta_dim(self) -> int:
        return self.theta_set.dim

    @property
    def alpha_dim(self) -> int:
        return self.alpha_set.dim

    def checked_grad_theta(self, theta, alpha, iteration=None) -> Vector:
        g = np.asarray(self.grad_theta(theta, alpha), dtype=float).reshape(self.theta_dim)
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite theta gradient", iteration)
        return g

    def checked_grad_alpha(self, theta, alpha, iteration=None) -> Vector:
        g = np.asarray(self.grad_alpha(theta, alpha), dtype=float).reshape(self.alpha_dim)
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite alpha gradient", iteration)
        return g


@dataclass
class Record:
    iter: int
    theta: Vector
    alpha: Vector
    x_measure: float
    y_measure: float
    f_value: float
    g_lambda_value: Optional[float] = None
    step_norm: float = 0.0
    wall_time_ns: int = 0

    @property
    def worst(self) -> float:
        return max(self.x_measure, self.y_measure)


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    best_index: int = 0
    # Free-form diagnostics (estimated constants, warnings) attached by the solver.
    info: dict = field(default_factory=dict)

    def append(self, record: Record) -> None:
        self.records.append(record)
        if record.worst < self.records[self.best_index].worst:
            self.best_index = len(self.records) - 1

    @property
    def best(self) -> Record:
        if not self.records:
            raise InvalidInputError("trajectory is empty")
        return self.records[self.best_index]

    def best_so_far(self) -> np.ndarray:
        """Running minimum of ``max(X, Y)`` over the records."""
        return np.minimum.accumulate([r.worst for r in self.records])

    def __len__(self):
        return len(self.records)


@dataclass(frozen=True)
class RateConstants:
    """Constants entering the iteration-count formulas.

    Build with :meth:`for_pl` or :meth:`for_ncc`; direct construction is
    allowed so that worked examples can pin individual values.
    """

    L: float
    L_bar: float
    R_bar: float
    Delta: float
    Delta_g: float
    g_max: float
    R: float = 1.0
    mu: Optional[float] = None
    rho: Optional[float] = None
    kappa: Optional[float] = None
    L_tilde: Optional[float] = None
    delta: Optional[float] = None
    lam: Optional[float] = None
    l11: float = 0.0
    l12: float = 0.0
    l22: float = 0.0

    @classmethod
    def for_pl(cls, l11, l12, l22, mu, R, Delta, Delta_g, g_max, eps=None):
        """Smoothness of the value function is ``l11 + l12^2 / mu``.

        The inner maximizer nearest to a given point moves by at most
        ``l12 / mu`` per unit change of theta; ``f = theta*alpha - alpha^2/2``
        attains both bounds.
        """
        if not mu > 0:
            raise InvalidInputError("PL constants need mu > 0")
        if l22 < mu:
            raise InvalidInputError("l22 must be at least mu")
        L = l11 + l12**2 / mu
        return cls._build(L, l11, l12, l22, R, Delta, Delta_g, g_max, eps,
                          mu=mu, rho=1.0 - mu / l22, kappa=l22 / mu)

    @classmethod
    def for_ncc(cls, l11, l12, l22, lam, R, Delta, Delta_g, g_max, eps=None):
        """Smoothness of the regularized value function is ``l11 + l12^2 / lam``."""
        if not lam > 0:
            raise InvalidInputError("regularization lam must be positive")
        L = l11 + l12**2 / lam
        return cls._build(L, l11, l12, l22, R, Delta, Delta_g, g_max, eps,
                          lam=lam, kappa=l22 / lam)

    @classmethod
    def _build(cls, L, l11, l12, l22, R, Delta, Delta_g, g_max, eps, **extra):
        g_max = max(g_max, 1.0)
        delta = None
        if eps is not None:
            delta = L * eps**2 / (2**6 * R * (g_max + L * R) ** 2)
        return cls(
            L=L,
            L_bar=max(l12, l22, L, g_max, 1.0),
            R_bar=max(R, 1.0),
            Delta=Delta,
            Delta_g=Delta_g,
            g_max=g_max,
            R=R,
            L_tilde=max(L, l12, g_max),
            delta=delta,
            l11=l11,
            l12=l12,
            l22=l22,
            **extra,
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}
