"""Multi-step gradient descent ascent for games whose inner player satisfies a PL condition.

Each outer iteration runs ``K`` plain gradient ascent steps on ``alpha`` with
step ``1/l22`` (warm-started from the previous outer iteration) and then one
projected gradient step on ``theta`` with step ``1/L``, where
``L = l11 + l12^2 / mu`` bounds the smoothness of the value function.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError, NumericError
from .geometry import Unconstrained
from .measures import x_measure, y_measure
from .oracle import ProblemOracle, RateConstants, Record, Trajectory

__all__ = ["PlConfig", "inner_ascent", "solve_pl", "pl_iteration_counts", "IterationCounts"]

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e6


def _ceil(x: float) -> int:
    # Absorb floating point noise so that e.g. 19.000000000000004 rounds to 19.
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


@dataclass
class PlConfig:
    eps: float
    K: int
    T: int
    eta1: float
    eta2: float
    warm_start: bool = True
    theta0: Optional[np.ndarray] = None
    alpha0: Optional[np.ndarray] = None
    measure_stride: int = 1
    stop_at_eps: bool = False

    def __post_init__(self):
        if self.K < 0 or self.T < 1:
            raise InvalidInputError("need K >= 0 and T >= 1")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise InvalidInputError("step sizes must be positive")
        if self.measure_stride < 1:
            raise InvalidInputError("measure_stride must be >= 1")

    @classmethod
    def for_problem(cls, problem: ProblemOracle, eps: float, K: int, T: int, **kwargs):
        """Theory step sizes: ``eta1 = 1/l22`` and ``eta2 = 1/(l11 + l12^2/mu)``."""
        if problem.mu is None:
            raise InvalidInputError("problem has no PL constant mu")
        if not problem.l22 > 0:
            raise InvalidInputError("l22 must be positive for the inner step 1/l22")
        L = problem.l11 + problem.l12**2 / problem.mu
        if not L > 0:
            raise InvalidInputError("value-function smoothness is zero; pass eta2 explicitly")
        return cls(eps=eps, K=K, T=T, eta1=1.0 / problem.l22, eta2=1.0 / L, **kwargs)


def inner_ascent(problem: ProblemOracle, theta, alpha0, K: int, eta1: float) -> np.ndarray:
    """Run ``K`` gradient ascent steps on ``f(theta, .)`` starting from ``alpha0``."""
    if K < 0:
        raise InvalidInputError("K must be >= 0")
    alpha = np.array(alpha0, dtype=float)
    for k in range(K):
        alpha = alpha + eta1 * problem.checked_grad_alpha(theta, alpha, iteration=k)
        if not np.all(np.isfinite(alpha)):
            raise NumericError("non-finite inner iterate", k)
    return alpha


def solve_pl(problem: ProblemOracle, config: PlConfig,
             trajectory: Optional[Trajectory] = None) -> Trajectory:
    """Run the outer loop and return one record per measured outer iteration.

    Record ``t`` holds ``(theta_t, alpha_K(theta_t))``, the pair whose
    stationarity the convergence guarantee is about.
    """
    if problem.mu is None:
        raise InvalidInputError("solve_pl needs the PL constant mu")
    if not isinstance(problem.alpha_set, Unconstrained):
        raise InvalidInputError("the max player must be unconstrained in a PL game")
    if not problem.theta_set.bounded:
        raise InvalidInputError("theta set must be bounded")

    theta = problem.theta_set.project(
        problem.theta_set.centroid() if config.theta0 is None else config.theta0
    )
    alpha_init = (
        np.zeros(problem.alpha_dim) if config.alpha0 is None
        else np.array(config.alpha0, dtype=float).reshape(problem.alpha_dim)
    )
    alpha = alpha_init.copy()
    # A caller-supplied trajectory keeps the records gathered before an abort.
    traj = Trajectory() if trajectory is None else trajectory
    start = time.perf_counter_ns()

    for t in range(config.T):
        try:
            alpha_k = inner_ascent(problem, theta, alpha, config.K, config.eta1)
        except NumericError as exc:
            raise NumericError(f"inner loop failed at outer iteration {t}: {exc}", t) from exc
        if np.linalg.norm(alpha_k) > DIVERGENCE_BOUND:
            raise NumericError(f"inner iterate norm exceeded {DIVERGENCE_BOUND:g}", t)

        grad = problem.checked_grad_theta(theta, alpha_k, iteration=t)
        theta_next = problem.theta_set.project(theta - config.eta2 * grad)

        if t % config.measure_stride == 0:
            rec = Record(
                iter=t,
                theta=theta.copy(),
                alpha=alpha_k.copy(),
                x_measure=x_measure(problem, theta, alpha_k),
                y_measure=y_measure(problem, theta, alpha_k),
                f_value=float(problem.f(theta, alpha_k)),
                step_norm=float(np.linalg.norm(theta_next - theta)),
                wall_time_ns=time.perf_counter_ns() - start,
            )
            traj.append(rec)
            if config.stop_at_eps and rec.worst <= config.eps:
                break

        theta = theta_next
        alpha = alpha_k if config.warm_start else alpha_init.copy()

    return traj


class IterationCounts(NamedTuple):
    T: int
    K: int


def pl_iteration_counts(constants: RateConstants, eps: float) -> IterationCounts:
    """Outer and inner iteration counts sufficient for an eps-FNE in a PL game."""
    if not 0 < eps < 1:
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps}")
    rho = constants.rho
    if rho is None or not 0 < rho < 1:
        raise InvalidInputError(f"rho must lie in (0, 1), got {rho}")
    c = constants
    log_term = math.log(
        2.0**15 * c.L_bar**6 * c.R_bar**6 * c.Delta / (c.L**2 * c.mu)
    )
    K = _ceil((4.0 * math.log(1.0 / eps) + log_term) / math.log(1.0 / rho))
    T = _ceil(32.0 * c.Delta_g * (c.g_max + c.L * c.R) ** 2 / (c.L * eps**2))
    return IterationCounts(T=max(T, 1), K=max(K, 1))
