"""Convex feasible sets, Euclidean projection and local linear minimization.

Every set exposes ``project``, ``contains``, ``sample`` and the radius of a
ball around the origin that encloses it. The module-level functions
:func:`project` and :func:`linear_min_local` are the entry points used by the
solvers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "FeasibleSet",
    "Unconstrained",
    "Box",
    "Ball",
    "Simplex",
    "LocalLinearResult",
    "InfeasiblePointWarning",
    "project",
    "project_simplex",
    "linear_min_local",
]

FEASIBILITY_TOL = 1e-8


class InfeasiblePointWarning(UserWarning):
    """Raised (as a warning) when a supposedly feasible point had to be projected."""


def _as_vector(x, dim: int, what: str = "point") -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != dim:
        raise InvalidInputError(f"{what} has shape {x.shape}, expected ({dim},)")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{what} has non-finite entries")
    return x


class FeasibleSet:
    """Base class; subclasses implement ``_project`` on validated input."""

    dim: int

    def project(self, point) -> np.ndarray:
        return self._project(_as_vector(point, self.dim))

    def _project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, point, tol: float = FEASIBILITY_TOL) -> bool:
        x = _as_vector(point, self.dim)
        return bool(np.linalg.norm(self._project(x) - x) <= tol)

    @property
    def enclosing_radius(self) -> Optional[float]:
        return None

    @property
    def bounded(self) -> bool:
        return self.enclosing_radius is not None

    def centroid(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` members, returned as rows of an ``(n, dim)`` array."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Unconstrained(FeasibleSet):
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")

    def _project(self, x):
        return x.copy()

    def centroid(self):
        return np.zeros(self.dim)

    def sample(self, rng, n):
        # Unbounded: draw from a standard normal around the origin.
        return rng.standard_normal((n, self.dim))

    def to_dict(self):
        return {"kind": "unconstrained", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class Box(FeasibleSet):
    lower: np.ndarray
    upper: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise InvalidInputError("box bounds must be 1-D arrays of equal length")
        if np.any(lower > upper):
            raise InvalidInputError("box requires lower <= upper componentwise")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InvalidInputError("box bounds must be finite")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "dim", lower.shape[0])

    def _project(self, x):
        return np.clip(x, self.lower, self.upper)

    @property
    def enclosing_radius(self):
        # half the diagonal; a degenerate box still gets a positive radius
        r = 0.5 * float(np.linalg.norm(self.upper - self.lower))
        return r if r > 0 else 1.0

    def centroid(self):
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng, n):
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def to_dict(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Ball(FeasibleSet):
    center: np.ndarray
    radius: float
    dim: int = field(init=False)

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.ndim != 1:
            raise InvalidInputError("ball center must be a vector")
        if not self.radius > 0:
            raise InvalidInputError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "dim", center.shape[0])

    def _project(self, x):
        d = x - self.center
        norm = np.linalg.norm(d)
        if norm <= self.radius:
            return x.copy()
        return self.center + d * (self.radius / norm)

    @property
    def enclosing_radius(self):
        return self.radius

    def centroid(self):
        return self.center.copy()

    def sample(self, rng, n):
        direction = rng.standard_normal((n, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
        return self.center + r * direction

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Simplex(FeasibleSet):
    """The probability simplex {x >= 0, sum(x) = 1}."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("simplex dim must be >= 1")

    def _project(self, x):
        return project_simplex(x)

    def contains(self, point, tol=FEASIBILITY_TOL):
        x = _as_vector(point, self.dim)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)

    @property
    def enclosing_radius(self):
        # distance from the centroid to a vertex
        return float(np.sqrt(1.0 - 1.0 / self.dim)) if self.dim > 1 else 1.0

    def centroid(self):
        return np.full(self.dim, 1.0 / self.dim)

    def sample(self, rng, n):
        return rng.dirichlet(np.ones(self.dim), size=n)

    def to_dict(self):
        return {"kind": "simplex", "dim": self.dim}


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    tau = cssv[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def set_from_dict(data: dict) -> FeasibleSet:
    kind = data["kind"]
    if kind == "unconstrained":
        return Unconstrained(int(data["dim"]))
    if kind == "box":
        return Box(data["lower"], data["upper"])
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "simplex":
        return Simplex(int(data["dim"]))
    raise InvalidInputError(f"unknown set kind {kind!r}")


def project(fset: FeasibleSet, point) -> np.ndarray:
    """Nearest point of ``fset`` to ``point`` in the Euclidean norm."""
    return fset.project(point)


class LocalLinearResult(NamedTuple):
    direction: np.ndarray
    value: float


def _feasible_center(fset: FeasibleSet, center) -> np.ndarray:
    x = _as_vector(center, fset.dim, "center")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("center has non-finite entries")
    p = fset._project(x)
    if np.linalg.norm(p - x) > FEASIBILITY_TOL:
        warnings.warn(
            f"center is {np.linalg.norm(p - x):.3g} away from the feasible set; projecting",
            InfeasiblePointWarning,
            stacklevel=3,
        )
        if not fset.contains(p):
            raise InvalidInputError("center could not be made feasible by projection")
    return p


def linear_min_local(fset: FeasibleSet, center, g) -> LocalLinearResult:
    """Minimize ``<g, s>`` over ``center + s`` in ``fset`` with ``||s|| <= 1``.

    For sets other than the unconstrained space and 1-D boxes the solution is
    traced along the projection arc ``s(tau) = P(center - tau g) - center``.
    Its norm is nondecreasing in ``tau`` and every point on it minimizes
    ``<g, s> + ||s||^2 / (2 tau)`` over the shifted set, so the KKT point of the
    ball-constrained problem is the arc point with unit norm (or the end of the
    arc when the whole arc stays inside the unit ball). The unit-norm point is
    located by bisection on ``tau``.
    """
    x = _feasible_center(fset, center)
    g = _as_vector(g, fset.dim, "g")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("g has non-finite entries")
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return LocalLinearResult(np.zeros(fset.dim), 0.0)

    if isinstance(fset, Unconstrained):
        s = -g / gnorm
        return LocalLinearResult(s, -gnorm)

    if isinstance(fset, Box) and fset.dim == 1:
        lo = max(fset.lower[0] - x[0], -1.0)
        hi = min(fset.upper[0] - x[0], 1.0)
        s = np.array([lo if g[0] > 0 else hi])
        return LocalLinearResult(s, min(float(g[0] * s[0]), 0.0))

    s = _arc_solution(fset, x, g, gnorm)
    return LocalLinearResult(s, min(float(g @ s), 0.0))


def _arc_solution(fset, x, g, gnorm, max_bisect=200):
    def arc(tau):
        return fset._project(x - tau * g) - x

    tau = 1.0 / gnorm
    s = arc(tau)
    if np.linalg.norm(s) < 1.0:
        # Grow tau until the arc leaves the unit ball or stops moving.
        lo = tau
        while True:
            tau *= 2.0
            s_next = arc(tau)
            n_next = np.linalg.norm(s_next)
            if n_next >= 1.0:
                hi = tau
                break
            if np.linalg.norm(s_next - s) <= 1e-15 * max(1.0, n_next) or tau * gnorm > 1e14:
                return s_next
            lo, s = tau, s_next
    else:
        hi = tau
        lo = 0.0
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if np.linalg.norm(arc(mid)) >= 1.0:
            hi = mid
        else:
            lo = mid
    s = arc(hi)
    n = np.linalg.norm(s)
    if n > 1.0:
        # 0 lies in the shifted set, so shrinking toward it keeps feasibility.
        s = s / n
    return s

