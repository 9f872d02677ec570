"""Finite differences, sampled Lipschitz constants and theory-constant estimates."""

from __future__ import annotations

import logging
from typing import List, NamedTuple, Optional

import numpy as np

from ..errors import InvalidInputError, NumericError
from ..oracle import ProblemOracle, RateConstants

logger = logging.getLogger(__name__)

__all__ = [
    "finite_diff_grad",
    "estimate_lipschitz",
    "sampled_lipschitz",
    "check_gradients",
    "GradCheck",
    "LipschitzEstimate",
    "estimate_rate_constants",
]


def finite_diff_grad(fn, point, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the scalar field ``fn`` at ``point``."""
    if not h > 0:
        raise InvalidInputError("h must be positive")
    x0 = np.atleast_1d(np.asarray(point, dtype=float))
    grad = np.zeros_like(x0)
    for j in range(x0.size):
        x = x0.copy()
        x[j] = x0[j] + h
        fplus = float(fn(x))
        x[j] = x0[j] - h
        fminus = float(fn(x))
        if not (np.isfinite(fplus) and np.isfinite(fminus)):
            raise NumericError(f"non-finite evaluation at coordinate {j}")
        grad[j] = (fplus - fminus) / (2 * h)
    return grad


class LipschitzEstimate(NamedTuple):
    l11: float
    l12: float
    l22: float
    warnings: List[str]


def _quotient(num, den):
    den = np.linalg.norm(den)
    return 0.0 if den == 0 else float(np.linalg.norm(num) / den)


def _draw(fset, rng, n, scale):
    pts = fset.sample(rng, n)
    if not fset.bounded:
        pts = scale * pts
    return pts


def estimate_lipschitz(problem: ProblemOracle, samples: int = 100, seed=0,
                       scale: float = 1.0) -> LipschitzEstimate:
    """Largest sampled difference quotients of the partial gradients.

    Each estimate is compared with the declared constant; anything above
    ``declared * 1.05 + 1e-9`` is reported in ``warnings``. Points in an
    unbounded set are drawn from a normal distribution with std ``scale``.
    """
    if samples < 2:
        raise InvalidInputError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    tset, aset = problem.theta_set, problem.alpha_set
    th1, th2 = _draw(tset, rng, samples, scale), _draw(tset, rng, samples, scale)
    al1, al2 = _draw(aset, rng, samples, scale), _draw(aset, rng, samples, scale)
    gt, ga = problem.grad_theta, problem.grad_alpha
    l11 = l12 = l22 = 0.0
    for a, b, x, y in zip(th1, th2, al1, al2):
        l11 = max(l11, _quotient(gt(a, x) - gt(b, x), a - b))
        l22 = max(l22, _quotient(ga(a, x) - ga(a, y), x - y))
        l12 = max(l12, _quotient(gt(a, x) - gt(a, y), x - y),
                  _quotient(ga(a, x) - ga(b, x), a - b))
    warnings = []
    for name, est in (("l11", l11), ("l12", l12), ("l22", l22)):
        declared = getattr(problem, name)
        if est > 1.05 * declared + 1e-9:
            warnings.append(f"{name}: sampled {est:.6g} exceeds declared {declared:.6g}")
    for w in warnings:
        logger.warning("%s: %s", problem.name, w)
    return LipschitzEstimate(l11, l12, l22, warnings)


sampled_lipschitz = estimate_lipschitz


class GradCheck(NamedTuple):
    theta_error: float
    alpha_error: float

    @property
    def worst(self) -> float:
        return max(self.theta_error, self.alpha_error)


def check_gradients(problem: ProblemOracle, n_points: int = 20, seed=0, h: float = 1e-6,
                    scale: float = 1.0) -> GradCheck:
    """Compare both partial gradients with central differences at sampled points.

    The error at a point is ``||fd - analytic|| / max(||analytic||, 1)``; the
    maximum over the points is returned for each partial.
    """
    rng = np.random.default_rng(seed)
    thetas = _draw(problem.theta_set, rng, n_points, scale)
    alphas = _draw(problem.alpha_set, rng, n_points, scale)
    et = ea = 0.0
    for th, al in zip(thetas, alphas):
        fd_t = finite_diff_grad(lambda x: problem.f(x, al), th, h)
        fd_a = finite_diff_grad(lambda y: problem.f(th, y), al, h)
        an_t = np.asarray(problem.grad_theta(th, al), dtype=float)
        an_a = np.asarray(problem.grad_alpha(th, al), dtype=float)
        et = max(et, float(np.linalg.norm(fd_t - an_t) / max(np.linalg.norm(an_t), 1.0)))
        ea = max(ea, float(np.linalg.norm(fd_a - an_a) / max(np.linalg.norm(an_a), 1.0)))
    return GradCheck(et, ea)


def _inner_value(problem, theta, alpha0, solver, lam, alpha_bar, steps):
    """Approximate ``(g(theta), alpha*(theta))`` for the (regularized) inner problem."""
    from ..ncc import apga, regularize
    from ..pl_gda import inner_ascent

    if solver == "pl":
        if problem.value is not None and problem.inner_argmax is not None:
            a = problem.inner_argmax(theta, 0.0, np.zeros(problem.alpha_dim))
            return float(problem.value(theta)), np.asarray(a, dtype=float)
        a = inner_ascent(problem, theta, alpha0, steps, 1.0 / problem.l22)
        return float(problem.f(theta, a)), a
    oracle = regularize(problem, lam, alpha_bar)
    if problem.inner_argmax is not None:
        a = oracle.exact_inner(theta)
    else:
        smooth = oracle.l22_reg
        N = max(1, int(np.floor(np.sqrt(8 * smooth / lam))))
        a = apga(oracle, theta, alpha0, 1.0 / smooth, N, steps)
    return oracle.f(theta, a), a


def estimate_rate_constants(problem: ProblemOracle, solver: str, eps: float, theta0, alpha0,
                            lam: Optional[float] = None, K_probe: int = 50, samples: int = 100,
                            seed=0) -> RateConstants:
    """Stand-in estimates of Delta, Delta_g and g_max feeding the iteration counts.

    Delta is the initial inner gap (inner problem solved with ``10 * K_probe``
    steps), Delta_g is ``g(theta0)`` minus the smallest sampled value of ``g``
    and g_max is the largest sampled gradient norm at approximate inner
    maximizers, floored at 1.
    """
    rng = np.random.default_rng(seed)
    alpha_bar = None
    if solver == "ncc":
        alpha_bar = problem.alpha_set.project(problem.alpha_set.centroid())
        R = problem.alpha_set.enclosing_radius
        lam = eps / (4 * R) if lam is None else lam
    else:
        R = problem.theta_set.enclosing_radius
    if R is None:
        raise InvalidInputError("estimating constants needs a bounded set")
    steps = 10 * K_probe
    g0, _ = _inner_value(problem, theta0, alpha0, solver, lam, alpha_bar, steps)
    if solver == "ncc":
        f0 = float(problem.f(theta0, alpha0)) - 0.5 * lam * float(
            np.sum((np.asarray(alpha0) - alpha_bar) ** 2))
    else:
        f0 = float(problem.f(theta0, alpha0))
    Delta = max(g0 - f0, 1e-12)
    g_min, g_max = g0, 1.0
    for th in problem.theta_set.sample(rng, samples):
        gv, a = _inner_value(problem, th, alpha0, solver, lam, alpha_bar, steps)
        g_min = min(g_min, gv)
        gt = np.linalg.norm(problem.grad_theta(th, a))
        ga = np.asarray(problem.grad_alpha(th, a), dtype=float)
        if solver == "ncc":
            ga = ga - lam * (a - alpha_bar)
        g_max = max(g_max, float(gt), float(np.linalg.norm(ga)) if solver == "ncc" else 0.0)
    Delta_g = max(g0 - g_min, 1e-12)
    logger.info("estimated Delta=%g Delta_g=%g g_max=%g", Delta, Delta_g, g_max)
    if solver == "pl":
        return RateConstants.for_pl(problem.l11, problem.l12, problem.l22, problem.mu, R,
                                    Delta, Delta_g, g_max, eps=eps)
    return RateConstants.for_ncc(problem.l11, problem.l12, problem.l22, lam, R,
                                 Delta, Delta_g, g_max, eps=eps)
