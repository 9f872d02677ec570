"""Regularized multi-step solver for non-convex concave games.

The inner problem is made ``lam``-strongly concave by subtracting
``lam/2 ||alpha - alpha_bar||^2``. It is solved by accelerated projected
gradient ascent restarted every ``N`` steps, and ``theta`` then takes one
projected gradient step or one Frank-Wolfe step on the regularized
objective. Stationarity is always measured on the original objective.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, InvalidInputError, NumericError
from .geometry import linear_min_local
from .measures import x_measure, y_measure
from .oracle import ProblemOracle, RateConstants, Record, Trajectory
from .pl_gda import DIVERGENCE_BOUND, _ceil

__all__ = [
    "RegularizedOracle",
    "NccConfig",
    "ConcavityWarning",
    "regularize",
    "apga",
    "apga_blocks",
    "outer_step_pgd",
    "outer_step_fw",
    "solve_ncc",
    "ncc_iteration_counts",
    "NccCounts",
    "check_concavity",
]

logger = logging.getLogger(__name__)

PGD = "pgd"
FW = "fw"


class ConcavityWarning(UserWarning):
    """f(theta, .) failed a sampled midpoint-concavity check."""


@dataclass(frozen=True, eq=False)
class RegularizedOracle:
    base: ProblemOracle
    lam: float
    alpha_bar: np.ndarray

    @property
    def theta_set(self):
        return self.base.theta_set

    @property
    def alpha_set(self):
        return self.base.alpha_set

    @property
    def l11(self):
        return self.base.l11

    @property
    def l12(self):
        return self.base.l12

    @property
    def l22_reg(self) -> float:
        return self.base.l22 + self.lam

    @property
    def L_g(self) -> float:
        """Smoothness constant of the regularized value function."""
        return self.base.l11 + self.base.l12**2 / self.lam

    def f(self, theta, alpha):
        d = np.asarray(alpha, dtype=float) - self.alpha_bar
        return float(self.base.f(theta, alpha)) - 0.5 * self.lam * float(d @ d)

    def grad_theta(self, theta, alpha):
        return self.base.grad_theta(theta, alpha)

    def grad_alpha(self, theta, alpha):
        g = np.asarray(self.base.grad_alpha(theta, alpha), dtype=float)
        return g - self.lam * (np.asarray(alpha, dtype=float) - self.alpha_bar)

    def checked_grad_theta(self, theta, alpha, iteration=None):
        return self.base.checked_grad_theta(theta, alpha, iteration)

    def checked_grad_alpha(self, theta, alpha, iteration=None):
        g = self.grad_alpha(theta, alpha)
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite alpha gradient", iteration)
        return g

    def exact_inner(self, theta):
        """Exact maximizer of ``f_lam(theta, .)`` if the base problem provides one."""
        if self.base.inner_argmax is None:
            raise InvalidInputError(f"problem {self.base.name!r} has no exact inner solver")
        return np.asarray(self.base.inner_argmax(theta, self.lam, self.alpha_bar), dtype=float)


def regularize(problem: ProblemOracle, lam: float, alpha_bar=None) -> RegularizedOracle:
    """Wrap ``problem`` so that ``f_lam = f - lam/2 ||alpha - alpha_bar||^2``.

    ``alpha_bar`` defaults to the projected centroid of the alpha set.
    """
    if not lam > 0:
        raise InvalidInputError(f"lam must be positive, got {lam}")
    if alpha_bar is None:
        alpha_bar = problem.alpha_set.project(problem.alpha_set.centroid())
    alpha_bar = np.asarray(alpha_bar, dtype=float).reshape(problem.alpha_dim)
    if not problem.alpha_set.contains(alpha_bar):
        raise InvalidInputError("alpha_bar must be feasible")
    return RegularizedOracle(problem, float(lam), alpha_bar)


def apga_blocks(oracle, theta, alpha0, eta: float, N: int, K: int) -> Iterator[np.ndarray]:
    """Yield the last iterate of each of the ``K // N + 1`` restart blocks."""
    if N < 1:
        raise InvalidInputError("restart period N must be >= 1")
    if K < 0:
        raise InvalidInputError("K must be >= 0")
    aset = oracle.alpha_set
    x_last = np.array(alpha0, dtype=float)
    for _ in range(K // N + 1):
        gamma = 1.0
        y = x_last
        x_prev = y  # makes the first extrapolation a no-op
        for i in range(N):
            x = aset.project(y + eta * oracle.checked_grad_alpha(theta, y, iteration=i))
            if not np.all(np.isfinite(x)):
                raise NumericError("non-finite APGA iterate", i)
            gamma_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * gamma * gamma))
            y = x + ((gamma - 1.0) / gamma_next) * (x - x_prev)
            x_prev, gamma = x, gamma_next
        x_last = x_prev
        yield x_last


def apga(oracle, theta, alpha0, eta: float, N: int, K: int) -> np.ndarray:
    """Accelerated projected gradient ascent with a restart every ``N`` steps."""
    x = None
    for x in apga_blocks(oracle, theta, alpha0, eta, N, K):
        pass
    return x


def outer_step_pgd(oracle: RegularizedOracle, theta, alpha, step: Optional[float] = None):
    """Projected gradient step on theta with step ``1/L_g`` unless overridden."""
    if step is None:
        if not oracle.L_g > 0:
            raise ConfigurationError("L_g is zero; supply an explicit step")
        step = 1.0 / oracle.L_g
    g = oracle.checked_grad_theta(theta, alpha)
    return oracle.theta_set.project(np.asarray(theta, dtype=float) - step * g)


def outer_step_fw(oracle: RegularizedOracle, theta, alpha, L_tilde: float):
    """Frank-Wolfe style step ``theta + (X_t / L_tilde) s_t``; returns ``(theta_next, X_t)``."""
    g = oracle.checked_grad_theta(theta, alpha)
    res = linear_min_local(oracle.theta_set, theta, g)
    x_t = max(-res.value, 0.0)
    ratio = x_t / L_tilde
    if ratio > 1.0 + 1e-12:
        raise ConfigurationError(
            f"step ratio X_t/L_tilde = {ratio:.4g} > 1; L_tilde={L_tilde:g} is too small"
        )
    theta_next = np.asarray(theta, dtype=float) + min(ratio, 1.0) * res.direction
    return oracle.theta_set.project(theta_next), x_t


def check_concavity(problem: ProblemOracle, rng: np.random.Generator, n: int = 100,
                    tol: float = 1e-9) -> int:
    """Count sampled midpoint-concavity violations of ``f(theta, .)``."""
    thetas = problem.theta_set.sample(rng, n)
    a1 = problem.alpha_set.sample(rng, n)
    a2 = problem.alpha_set.sample(rng, n)
    bad = 0
    for th, x, y in zip(thetas, a1, a2):
        mid = problem.f(th, 0.5 * (x + y))
        chord = 0.5 * (problem.f(th, x) + problem.f(th, y))
        if mid < chord - tol * max(1.0, abs(chord)):
            bad += 1
    return bad


def estimate_g_max(problem: ProblemOracle, rng: np.random.Generator, lam: float,
                   alpha_bar, n: int = 100) -> float:
    """Sampled gradient-norm bound over the feasible sets, floored at 1."""
    thetas = problem.theta_set.sample(rng, n)
    alphas = problem.alpha_set.sample(rng, n)
    best = 1.0
    for th, al in zip(thetas, alphas):
        gt = np.linalg.norm(problem.grad_theta(th, al))
        ga = np.linalg.norm(np.asarray(problem.grad_alpha(th, al)) - lam * (al - alpha_bar))
        best = max(best, gt, ga)
    return float(best)


@dataclass
class NccConfig:
    eps: float
    lam: float
    eta: float
    N: int
    K: int
    T: int
    outer_rule: str = PGD
    L_tilde: Optional[float] = None
    theta0: Optional[np.ndarray] = None
    alpha0: Optional[np.ndarray] = None
    alpha_bar: Optional[np.ndarray] = None
    outer_step: Optional[float] = None
    exact_inner: bool = False
    measure_stride: int = 1
    stop_at_eps: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInputError("lam must be positive")
        if not self.eta > 0:
            raise InvalidInputError("eta must be positive")
        if self.N < 1 or self.K < self.N or self.T < 1:
            raise InvalidInputError(f"need N >= 1, K >= N, T >= 1 (got N={self.N}, K={self.K}, T={self.T})")
        if self.outer_rule not in (PGD, FW):
            raise InvalidInputError(f"outer_rule must be 'pgd' or 'fw', got {self.outer_rule!r}")
        if self.measure_stride < 1:
            raise InvalidInputError("measure_stride must be >= 1")

    @classmethod
    def for_problem(cls, problem: ProblemOracle, eps: float, K: Optional[int] = None,
                    T: int = 1000, lam: Optional[float] = None, **kwargs):
        """Defaults: ``lam = eps/(4R)``, ``eta = 1/(l22 + lam)``, ``N = floor(sqrt(8 (l22 + lam)/lam))``.

        ``R`` is the enclosing radius of the alpha set. ``K`` defaults to ``N``.
        """
        if lam is None:
            R = problem.alpha_set.enclosing_radius
            if R is None:
                raise InvalidInputError("alpha set must be bounded")
            lam = eps / (4.0 * R)
        smooth = problem.l22 + lam
        N = max(1, int(math.floor(math.sqrt(8.0 * smooth / lam) + 1e-9)))
        if K is None:
            K = N
        return cls(eps=eps, lam=lam, eta=1.0 / smooth, N=N, K=max(K, N), T=T, **kwargs)


def solve_ncc(problem: ProblemOracle, config: NccConfig,
              trajectory: Optional[Trajectory] = None) -> Trajectory:
    """Run the regularized solver; record t holds ``(theta_t, alpha_{t+1})``."""
    if not problem.alpha_set.bounded:
        raise InvalidInputError("alpha set must be bounded")
    rng = np.random.default_rng(config.seed)
    oracle = regularize(problem, config.lam, config.alpha_bar)

    # A caller-supplied trajectory keeps the records gathered before an abort.
    traj = Trajectory() if trajectory is None else trajectory
    violations = check_concavity(problem, rng)
    if violations:
        msg = f"f(theta, .) failed {violations}/100 sampled concavity checks on {problem.name!r}"
        warnings.warn(msg, ConcavityWarning, stacklevel=2)
        traj.info["concavity_violations"] = violations

    L_tilde = config.L_tilde
    if config.outer_rule == FW and L_tilde is None:
        g_max = estimate_g_max(problem, rng, config.lam, oracle.alpha_bar)
        L_tilde = max(oracle.L_g, problem.l12, g_max)
        traj.info["g_max_estimate"] = g_max
        logger.info("FW step constant L_tilde=%g (g_max estimate %g)", L_tilde, g_max)
    traj.info["L_tilde"] = L_tilde
    traj.info["L_g"] = oracle.L_g
    traj.info["alpha_bar"] = oracle.alpha_bar.tolist()

    theta = problem.theta_set.project(
        problem.theta_set.centroid() if config.theta0 is None else config.theta0
    )
    alpha = problem.alpha_set.project(
        oracle.alpha_bar if config.alpha0 is None else config.alpha0
    )
    start = time.perf_counter_ns()

    for t in range(config.T):
        try:
            if config.exact_inner:
                alpha_next = oracle.exact_inner(theta)
            else:
                alpha_next = apga(oracle, theta, alpha, config.eta, config.N, config.K)
        except NumericError as exc:
            raise NumericError(f"inner loop failed at outer iteration {t}: {exc}", t) from exc
        if np.linalg.norm(alpha_next) > DIVERGENCE_BOUND:
            raise NumericError(f"inner iterate norm exceeded {DIVERGENCE_BOUND:g}", t)

        if config.outer_rule == PGD:
            theta_next = outer_step_pgd(oracle, theta, alpha_next, config.outer_step)
        else:
            theta_next, _ = outer_step_fw(oracle, theta, alpha_next, L_tilde)
        if not np.all(np.isfinite(theta_next)):
            raise NumericError("non-finite theta iterate", t)

        if t % config.measure_stride == 0:
            rec = Record(
                iter=t,
                theta=theta.copy(),
                alpha=alpha_next.copy(),
                x_measure=x_measure(problem, theta, alpha_next),
                y_measure=y_measure(problem, theta, alpha_next),
                f_value=float(problem.f(theta, alpha_next)),
                g_lambda_value=oracle.f(theta, alpha_next),
                step_norm=float(np.linalg.norm(theta_next - theta)),
                wall_time_ns=time.perf_counter_ns() - start,
            )
            traj.append(rec)
            if config.stop_at_eps and rec.worst <= config.eps:
                break

        theta, alpha = theta_next, alpha_next

    return traj


class NccCounts(NamedTuple):
    T: int
    K: int
    lam: float
    N: int


def ncc_iteration_counts(constants: RateConstants, eps: float, outer_rule: str = PGD) -> NccCounts:
    """Theory schedule: ``lam = eps/(4R)``, restart period, inner and outer counts.

    Only the raw fields of ``constants`` (l11, l12, l22, R, Delta, Delta_g,
    g_max) are used; everything that depends on ``lam`` is recomputed.
    """
    if not 0 < eps < 1:
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps}")
    if outer_rule not in (PGD, FW):
        raise InvalidInputError(f"outer_rule must be 'pgd' or 'fw', got {outer_rule!r}")
    c0 = constants
    lam = eps / (4.0 * c0.R)
    c = RateConstants.for_ncc(c0.l11, c0.l12, c0.l22, lam, c0.R, c0.Delta, c0.Delta_g,
                              c0.g_max, eps=eps)
    N = int(math.floor(math.sqrt(8.0 * c.kappa) + 1e-9))
    log_term = math.log(2.0**17 * c.L_bar**6 * c.R_bar**6 * c.Delta / (c.L**2 * lam))
    K = _ceil(math.sqrt(8.0 * c.kappa) / math.log(2.0) * (4.0 * math.log(1.0 / eps) + log_term))
    if outer_rule == PGD:
        T = _ceil(32.0 * c.Delta_g * (c.g_max + c.L * c.R) ** 2 / (c.L * eps**2))
    else:
        T = _ceil(8.0 * c.L_tilde * c.Delta / eps**2)
    return NccCounts(T=max(T, 1), K=max(K, N, 1), lam=lam, N=max(N, 1))
