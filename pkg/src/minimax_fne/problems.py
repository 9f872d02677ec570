"""Built-in games and the finite-max-over-simplex machinery.

The finite-max problem ``min_theta max_i loss_i(theta)`` is written as the
game ``min_theta max_{t in simplex} sum_i t_i loss_i(theta)``. Adding
``-lam/2 ||t||^2`` makes the inner problem strongly concave; its maximizer
is found from the KKT conditions ``t_i = max(0, (loss_i - nu) / lam)`` with
the threshold ``nu`` located by sorting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import Box, FeasibleSet, Simplex, Unconstrained
from .oracle import ProblemOracle

__all__ = [
    "quadratic_saddle",
    "abs_value_game",
    "pl_hyperplane_game",
    "quadratic_pl_game",
    "simplex_inner_argmax",
    "kkt_threshold",
    "GroupData",
    "GroupLossModel",
    "fair_classification_problem",
    "synth_fair_dataset",
    "quadratic_groups",
    "write_dataset_csv",
    "read_dataset_csv",
    "train_group_model",
    "BUILTIN_PROBLEMS",
    "make_problem",
]


def _scalar(x) -> float:
    return float(np.asarray(x, dtype=float).reshape(-1)[0])


def _box_argmax_1d(coef2: float, coef1: float, lo: float, hi: float) -> float:
    """Maximize ``coef2 * a^2 + coef1 * a`` over ``[lo, hi]``."""
    cands = [lo, hi]
    if coef2 < 0:
        cands.append(min(max(-coef1 / (2 * coef2), lo), hi))
    vals = [coef2 * a * a + coef1 * a for a in cands]
    return cands[int(np.argmax(vals))]


def quadratic_saddle() -> ProblemOracle:
    """``f = -theta^2 + alpha^2 + 4 theta alpha`` on ``[-1, 1] x [-2, 2]``.

    The only first-order Nash equilibrium is the origin; ``f(theta, .)`` is
    convex, so the game is not concave in the max player.
    """

    def f(th, al):
        th, al = _scalar(th), _scalar(al)
        return -th * th + al * al + 4 * th * al

    def grad_theta(th, al):
        return np.array([-2 * _scalar(th) + 4 * _scalar(al)])

    def grad_alpha(th, al):
        return np.array([2 * _scalar(al) + 4 * _scalar(th)])

    def inner_argmax(th, lam, alpha_bar):
        th, ab = _scalar(th), _scalar(alpha_bar)
        return np.array([_box_argmax_1d(1.0 - lam / 2, 4 * th + lam * ab, -2.0, 2.0)])

    def value(th):
        th = _scalar(th)
        return 4 + 8 * abs(th) - th * th

    return ProblemOracle(
        f, grad_theta, grad_alpha, Box([-1.0], [1.0]), Box([-2.0], [2.0]),
        l11=2.0, l12=4.0, l22=2.0, name="quadratic_saddle",
        inner_argmax=inner_argmax, value=value,
    )


def abs_value_game() -> ProblemOracle:
    """``f = (2 alpha - 1) theta`` on ``[-1, 1] x [0, 1]``; the value function is ``|theta|``."""

    def f(th, al):
        return (2 * _scalar(al) - 1) * _scalar(th)

    def grad_theta(th, al):
        return np.array([2 * _scalar(al) - 1])

    def grad_alpha(th, al):
        return np.array([2 * _scalar(th)])

    def inner_argmax(th, lam, alpha_bar):
        return np.array([min(max(_scalar(alpha_bar) + 2 * _scalar(th) / lam, 0.0), 1.0)])

    return ProblemOracle(
        f, grad_theta, grad_alpha, Box([-1.0], [1.0]), Box([0.0], [1.0]),
        l11=0.0, l12=2.0, l22=0.0, name="abs_value_game",
        inner_argmax=inner_argmax, value=lambda th: abs(_scalar(th)),
    )


def pl_hyperplane_game(a, theta_box=(-1.0, 1.0)) -> ProblemOracle:
    """``f = -||A alpha - theta 1||^2`` with scalar theta and unconstrained alpha.

    With a vector ``a`` this is ``-(a . alpha - theta)^2``. The inner problem
    is PL with ``mu = 2 sigma_min(A)^2`` but not strongly concave once alpha
    has more entries than ``A`` has rows. ``A`` must have full row rank, so
    the value function is identically zero.
    """
    A = np.atleast_2d(np.asarray(a, dtype=float))
    m, d = A.shape
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size < m or sv.min() <= 1e-12 * max(sv.max(), 1.0):
        raise InvalidInputError("a must be nonzero (full row rank when a matrix)")
    ones = np.ones(m)
    lo, hi = theta_box

    def resid(th, al):
        return A @ np.asarray(al, dtype=float) - _scalar(th) * ones

    def f(th, al):
        r = resid(th, al)
        return -float(r @ r)

    def grad_theta(th, al):
        return np.array([2.0 * resid(th, al).sum()])

    def grad_alpha(th, al):
        return -2.0 * A.T @ resid(th, al)

    def nearest_optimal(th, al):
        # Orthogonal projection of alpha onto {A x = theta 1}.
        r = resid(th, al)
        return np.asarray(al, dtype=float) - A.T @ np.linalg.solve(A @ A.T, r)

    prob = ProblemOracle(
        f, grad_theta, grad_alpha, Box([lo], [hi]), Unconstrained(d),
        l11=2.0 * m, l12=2.0 * float(np.linalg.norm(A.T @ ones)),
        l22=2.0 * float(sv.max() ** 2), mu=2.0 * float(sv.min() ** 2),
        name="pl_hyperplane_game", value=lambda th: 0.0,
        extras={"nearest_optimal": nearest_optimal, "A": A},
    )
    return prob


def quadratic_pl_game(p: float = -1.0, b: float = 1.0, q: float = 1.0,
                      theta_box=(-1.0, 1.0)) -> ProblemOracle:
    """``f = b theta alpha - q/2 alpha^2 + p/2 theta^2`` with unconstrained alpha.

    The inner maximizer is ``b theta / q`` and the value function is
    ``(b^2/(2q) + p/2) theta^2``.
    """
    if not q > 0:
        raise InvalidInputError("q must be positive")
    lo, hi = theta_box

    def f(th, al):
        th, al = _scalar(th), _scalar(al)
        return b * th * al - 0.5 * q * al * al + 0.5 * p * th * th

    def grad_theta(th, al):
        return np.array([b * _scalar(al) + p * _scalar(th)])

    def grad_alpha(th, al):
        return np.array([b * _scalar(th) - q * _scalar(al)])

    def inner_argmax(th, lam, alpha_bar):
        return np.array([(b * _scalar(th) + lam * _scalar(alpha_bar)) / (q + lam)])

    return ProblemOracle(
        f, grad_theta, grad_alpha, Box([lo], [hi]), Unconstrained(1),
        l11=abs(p), l12=abs(b), l22=q, mu=q, name="quadratic_pl_game",
        inner_argmax=inner_argmax,
        value=lambda th: (b * b / (2 * q) + p / 2) * _scalar(th) ** 2,
    )


# -- finite max over the simplex ------------------------------------------------


def kkt_threshold(losses, lam: float) -> float:
    """Multiplier ``nu`` with ``sum_i max(0, (losses_i - nu)/lam) = 1``."""
    z = np.sort(np.asarray(losses, dtype=float) / lam)[::-1]
    css = np.cumsum(z) - 1.0
    k = np.arange(1, z.size + 1)
    support = np.count_nonzero(z - css / k > 0)
    return float(lam * css[support - 1] / support)


def simplex_inner_argmax(losses, lam: float, unregularized: bool = False) -> np.ndarray:
    """Maximize ``sum_i t_i losses_i - lam/2 ||t||^2`` over the probability simplex.

    With ``unregularized=True`` ``lam`` is ignored and the vertex of the
    largest loss is returned, ties going to the lowest index.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise InvalidInputError("losses must be a non-empty vector")
    if not np.all(np.isfinite(losses)):
        raise InvalidInputError("losses must be finite")
    if unregularized:
        t = np.zeros_like(losses)
        t[int(np.argmax(losses))] = 1.0
        return t
    if not lam > 0:
        raise InvalidInputError("lam must be positive (use unregularized=True for lam = 0)")
    nu = kkt_threshold(losses, lam)
    t = np.maximum((losses - nu) / lam, 0.0)
    return t / t.sum()


# -- group loss models -------------------------------------------------------------


class GroupData(NamedTuple):
    features: np.ndarray
    labels: np.ndarray


def _softmax_ce(scores, labels):
    """Mean cross entropy and the gradient w.r.t. ``scores``."""
    s = scores - scores.max(axis=1, keepdims=True)
    logp = s - np.log(np.exp(s).sum(axis=1, keepdims=True))
    n = scores.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    p = np.exp(logp)
    p[np.arange(n), labels] -= 1.0
    return float(loss), p / n


@dataclass(frozen=True, eq=False)
class GroupLossModel:
    """One dataset per group and a shared model with parameters ``theta``.

    ``loss_kind``:
      * ``"logistic"``: multinomial logistic regression with intercept.
      * ``"tanh"``: one hidden tanh layer of ``hidden`` units, softmax output.
      * ``"quadratic"``: least squares ``mean((X theta - y)^2)``, no intercept.
    """

    groups: List[GroupData]
    loss_kind: str = "logistic"
    n_classes: int = 3
    hidden: int = 8
    dim: int = field(init=False)

    def __post_init__(self):
        if not self.groups:
            raise InvalidInputError("need at least one group")
        if self.loss_kind not in ("logistic", "tanh", "quadratic"):
            raise InvalidInputError(f"unknown loss_kind {self.loss_kind!r}")
        groups = []
        dim = None
        for g in self.groups:
            X = np.atleast_2d(np.asarray(g.features, dtype=float))
            y = np.asarray(g.labels)
            if X.shape[0] == 0:
                raise InvalidInputError("groups must be non-empty")
            if y.shape != (X.shape[0],):
                raise InvalidInputError("labels must match the number of feature rows")
            if dim is None:
                dim = X.shape[1]
            elif X.shape[1] != dim:
                raise InvalidInputError("feature dimensions differ between groups")
            if self.loss_kind == "quadratic":
                y = y.astype(float)
            else:
                y = y.astype(int)
                if y.min() < 0 or y.max() >= self.n_classes:
                    raise InvalidInputError("labels out of range for n_classes")
            groups.append(GroupData(X, y))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "dim", dim)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_params(self) -> int:
        if self.loss_kind == "quadratic":
            return self.dim
        if self.loss_kind == "logistic":
            return self.n_classes * (self.dim + 1)
        return self.hidden * (self.dim + 1) + self.n_classes * (self.hidden + 1)

    def _unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise InvalidInputError(f"theta has shape {theta.shape}, expected ({self.n_params},)")
        if self.loss_kind == "logistic":
            return theta.reshape(self.n_classes, self.dim + 1), None
        cut = self.hidden * (self.dim + 1)
        return (theta[:cut].reshape(self.hidden, self.dim + 1),
                theta[cut:].reshape(self.n_classes, self.hidden + 1))

    def _group_loss_grad(self, theta, g: GroupData, need_grad=True):
        X, y = g.features, g.labels
        if self.loss_kind == "quadratic":
            r = X @ np.asarray(theta, dtype=float) - y
            return float(r @ r / len(y)), (2.0 * X.T @ r / len(y) if need_grad else None)
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        W1, W2 = self._unpack(theta)
        if self.loss_kind == "logistic":
            loss, dS = _softmax_ce(Xb @ W1.T, y)
            return loss, ((dS.T @ Xb).ravel() if need_grad else None)
        H = np.tanh(Xb @ W1.T)
        Hb = np.hstack([H, np.ones((H.shape[0], 1))])
        loss, dS = _softmax_ce(Hb @ W2.T, y)
        if not need_grad:
            return loss, None
        gW2 = dS.T @ Hb
        dH = (dS @ W2[:, :-1]) * (1.0 - H * H)
        gW1 = dH.T @ Xb
        return loss, np.concatenate([gW1.ravel(), gW2.ravel()])

    def group_losses(self, theta) -> np.ndarray:
        return np.array([self._group_loss_grad(theta, g, need_grad=False)[0] for g in self.groups])

    def losses_and_grads(self, theta):
        """Return ``(losses, grads)`` with ``grads`` of shape ``(n_groups, n_params)``."""
        out = [self._group_loss_grad(theta, g) for g in self.groups]
        return np.array([o[0] for o in out]), np.vstack([o[1] for o in out])

    def predict(self, theta, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.loss_kind == "quadratic":
            return X @ theta
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        W1, W2 = self._unpack(theta)
        if self.loss_kind == "logistic":
            return np.argmax(Xb @ W1.T, axis=1)
        Hb = np.hstack([np.tanh(Xb @ W1.T), np.ones((X.shape[0], 1))])
        return np.argmax(Hb @ W2.T, axis=1)

    def lipschitz_bounds(self, theta_set: FeasibleSet):
        """Analytic ``(l11, l12)`` for the convex kinds; ``None`` for tanh."""
        m = self.n_groups
        if self.loss_kind == "logistic":
            l11 = max(0.5 * np.linalg.eigvalsh(_aug(g.features).T @ _aug(g.features) / len(g.labels)).max()
                      for g in self.groups)
            xmax = max(np.linalg.norm(_aug(g.features), axis=1).max() for g in self.groups)
            return float(l11), float(math.sqrt(2.0 * m) * xmax)
        if self.loss_kind == "quadratic":
            if not theta_set.bounded:
                raise InvalidInputError("quadratic group losses need a bounded theta set")
            # bound on ||theta|| over the set
            R = float(np.linalg.norm(theta_set.centroid())) + theta_set.enclosing_radius
            l11 = 0.0
            gmax = 0.0
            for g in self.groups:
                X, y = g.features, g.labels
                hess = 2.0 * X.T @ X / len(y)
                top = float(np.linalg.eigvalsh(hess).max())
                l11 = max(l11, top)
                gmax = max(gmax, top * R + 2.0 * float(np.linalg.norm(X.T @ y)) / len(y))
            return l11, math.sqrt(m) * gmax
        return None


def _aug(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def fair_classification_problem(dataset: GroupLossModel, lam: Optional[float] = None,
                                theta_set: Optional[FeasibleSet] = None,
                                lipschitz_seed: int = 0) -> ProblemOracle:
    """``min_theta max_{t in simplex} sum_i t_i loss_i(theta)``.

    ``lam`` is the regularization the caller intends to use; it is kept on
    the oracle as ``suggested_lambda``. The exact regularized inner solver
    is attached as ``inner_argmax``.
    """
    if not isinstance(dataset, GroupLossModel):
        raise InvalidInputError("dataset must be a GroupLossModel")
    if theta_set is None:
        theta_set = (Box(-10.0 * np.ones(dataset.n_params), 10.0 * np.ones(dataset.n_params))
                     if dataset.loss_kind == "quadratic" else Unconstrained(dataset.n_params))
    if theta_set.dim != dataset.n_params:
        raise InvalidInputError("theta set dimension does not match the model")
    m = dataset.n_groups

    def f(th, t):
        return float(np.asarray(t, dtype=float) @ dataset.group_losses(th))

    def grad_theta(th, t):
        _, G = dataset.losses_and_grads(th)
        return np.asarray(t, dtype=float) @ G

    def grad_alpha(th, t):
        return dataset.group_losses(th)

    def inner_argmax(th, lam_, alpha_bar):
        losses = dataset.group_losses(th)
        if lam_ == 0:
            return simplex_inner_argmax(losses, 0.0, unregularized=True)
        # -lam/2 ||t - a||^2 = lam <t, a> - lam/2 ||t||^2 + const
        return simplex_inner_argmax(losses + lam_ * np.asarray(alpha_bar, dtype=float), lam_)

    bounds = dataset.lipschitz_bounds(theta_set)
    if bounds is None:
        from .harness.diagnostics import sampled_lipschitz

        probe = ProblemOracle(f, grad_theta, grad_alpha, theta_set, Simplex(m), 0.0, 0.0, 0.0)
        est = sampled_lipschitz(probe, samples=50, seed=lipschitz_seed, scale=0.5)
        # Sampled estimates only; doubled as a safety margin.
        bounds = (2.0 * est.l11, 2.0 * est.l12)

    prob = ProblemOracle(
        f, grad_theta, grad_alpha, theta_set, Simplex(m),
        l11=bounds[0], l12=bounds[1], l22=0.0, name=f"fair_{dataset.loss_kind}",
        inner_argmax=inner_argmax,
        value=lambda th: float(dataset.group_losses(th).max()),
        extras={"dataset": dataset, "suggested_lambda": lam},
    )
    return prob


def synth_fair_dataset(seed: int, n_per_group: int, loss_kind: str = "logistic") -> GroupLossModel:
    """Three 2-D Gaussian blobs, one per class.

    Classes 0 and 1 sit left and right; class 2 is a wider blob between them
    that overlaps both, so average-loss training gives it up.
    """
    if n_per_group < 10:
        raise InvalidInputError("n_per_group must be >= 10")
    rng = np.random.default_rng(seed)
    centers = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 0.5]])
    scales = np.array([1.0, 1.0, 1.6])
    groups = []
    for k in range(3):
        X = centers[k] + scales[k] * rng.standard_normal((n_per_group, 2))
        groups.append(GroupData(X, np.full(n_per_group, k)))
    return GroupLossModel(groups, loss_kind=loss_kind, n_classes=3)


def quadratic_groups(centers: Sequence[float]) -> GroupLossModel:
    """Group losses ``(theta - c_i)^2`` for scalar theta, one sample per group."""
    groups = [GroupData(np.array([[1.0]]), np.array([float(c)])) for c in centers]
    return GroupLossModel(groups, loss_kind="quadratic", n_classes=1)


def write_dataset_csv(dataset: GroupLossModel, path) -> None:
    """Columns: ``group_id, label, x1, x2, ...`` with a header row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group_id", "label"] + [f"x{j + 1}" for j in range(dataset.dim)])
        for gid, g in enumerate(dataset.groups):
            for x, y in zip(g.features, g.labels):
                w.writerow([gid, repr(y.item()), *[repr(float(v)) for v in x]])


def read_dataset_csv(path, loss_kind: str = "logistic", n_classes: Optional[int] = None,
                     hidden: int = 8) -> GroupLossModel:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["group_id", "label"] or len(header) < 3:
            raise InvalidInputError(f"unexpected CSV header {header}")
        rows = [r for r in reader if r]
    if not rows:
        raise InvalidInputError("dataset CSV has no rows")
    gids = np.array([int(r[0]) for r in rows])
    labels = np.array([float(r[1]) for r in rows])
    X = np.array([[float(v) for v in r[2:]] for r in rows])
    groups = []
    for gid in sorted(set(gids.tolist())):
        mask = gids == gid
        y = labels[mask] if loss_kind == "quadratic" else labels[mask].astype(int)
        groups.append(GroupData(X[mask], y))
    if n_classes is None:
        n_classes = 1 if loss_kind == "quadratic" else int(labels.max()) + 1
    return GroupLossModel(groups, loss_kind=loss_kind, n_classes=n_classes, hidden=hidden)


def train_group_model(dataset: GroupLossModel, method: str, iters: int, lr: float,
                      lam: float = 0.1, seed: int = 0, theta0=None) -> dict:
    """Gradient training of ``dataset`` under one of three group weightings.

    ``method``: ``"average"`` (uniform weights), ``"minmax"`` (weight on the
    worst group) or ``"minmax_reg"`` (KKT weights of the ``lam``-regularized
    inner problem). The min-max variants take an exact inner step followed by
    one gradient step on theta. Returns the final parameters and per-iteration
    series of the worst-group loss and the weighted objective.
    """
    if method not in ("average", "minmax", "minmax_reg"):
        raise InvalidInputError(f"unknown method {method!r}")
    m = dataset.n_groups
    if theta0 is None:
        theta0 = 0.01 * np.random.default_rng(seed).standard_normal(dataset.n_params)
    theta = np.array(theta0, dtype=float)
    worst, objective = [], []
    for _ in range(iters):
        losses, G = dataset.losses_and_grads(theta)
        if method == "average":
            t = np.full(m, 1.0 / m)
        elif method == "minmax":
            t = simplex_inner_argmax(losses, 0.0, unregularized=True)
        else:
            t = simplex_inner_argmax(losses, lam)
        worst.append(float(losses.max()))
        objective.append(float(t @ losses))
        theta = theta - lr * (t @ G)
    final = dataset.group_losses(theta)
    return {
        "theta": theta,
        "worst_loss": np.array(worst),
        "objective": np.array(objective),
        "final_group_losses": final,
    }


BUILTIN_PROBLEMS = ("quadratic_saddle", "abs_value_game", "pl_hyperplane_game",
                    "quadratic_pl_game", "fair")


def make_problem(selector: dict) -> ProblemOracle:
    """Build a built-in problem from a JSON-style selector ``{"name": ..., ...}``."""
    selector = dict(selector)
    name = selector.pop("name")
    if name == "quadratic_saddle":
        return quadratic_saddle()
    if name == "abs_value_game":
        return abs_value_game()
    if name == "pl_hyperplane_game":
        return pl_hyperplane_game(selector.get("a", [1.0, 1.0]), tuple(selector.get("theta_box", (-1.0, 1.0))))
    if name == "quadratic_pl_game":
        return quadratic_pl_game(**selector)
    if name == "fair":
        kind = selector.get("loss_kind", "logistic")
        if "csv" in selector:
            data = read_dataset_csv(selector["csv"], loss_kind=kind)
        elif "centers" in selector:
            data = quadratic_groups(selector["centers"])
        else:
            data = synth_fair_dataset(int(selector.get("seed", 0)), int(selector.get("n_per_group", 200)), kind)
        return fair_classification_problem(data, selector.get("lam"))
    raise InvalidInputError(f"unknown problem {name!r}; choose from {BUILTIN_PROBLEMS}")
