import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from minimax_fne.errors import InvalidInputError
from minimax_fne.geometry import (
    Ball,
    Box,
    InfeasiblePointWarning,
    Simplex,
    Unconstrained,
    linear_min_local,
    project,
    project_simplex,
    set_from_dict,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def simplex_projection_oracle(v):
    """Brute force: try every support set, keep the feasible KKT candidate closest to v."""
    n = len(v)
    best, best_d = None, np.inf
    for k in range(1, n + 1):
        for support in itertools.combinations(range(n), k):
            idx = list(support)
            tau = (v[idx].sum() - 1.0) / k
            x = np.zeros(n)
            x[idx] = v[idx] - tau
            if np.all(x >= -1e-12):
                d = np.linalg.norm(x - v)
                if d < best_d:
                    best, best_d = x, d
    return best


def test_ball_projection_scales_radially():
    np.testing.assert_allclose(project(Ball([0.0, 0.0], 1.0), [3.0, 4.0]), [0.6, 0.8])


def test_box_projection_clamps():
    np.testing.assert_allclose(Box([-1.0], [1.0]).project([2.5]), [1.0])


def test_simplex_projection_example():
    np.testing.assert_allclose(Simplex(3).project([0.9, 0.2, -0.1]), [0.85, 0.15, 0.0], atol=1e-12)


def test_simplex_projection_matches_support_enumeration(rng):
    for _ in range(200):
        v = rng.normal(scale=2.0, size=rng.integers(1, 6))
        np.testing.assert_allclose(project_simplex(v), simplex_projection_oracle(v), atol=1e-10)


def test_unconstrained_projection_is_identity():
    x = np.array([1.5, -2.0])
    np.testing.assert_array_equal(Unconstrained(2).project(x), x)


def test_dimension_mismatch_rejected():
    with pytest.raises(InvalidInputError):
        Box([0.0, 0.0], [1.0, 1.0]).project([1.0])


def test_invalid_sets_rejected():
    with pytest.raises(InvalidInputError):
        Box([1.0], [0.0])
    with pytest.raises(InvalidInputError):
        Ball([0.0], 0.0)
    with pytest.raises(InvalidInputError):
        Simplex(0)


def test_nan_point_rejected():
    with pytest.raises(InvalidInputError):
        Box([0.0], [1.0]).project([np.nan])


def test_enclosing_radius():
    assert Unconstrained(2).enclosing_radius is None
    assert Box([-1.0, -1.0], [1.0, 1.0]).enclosing_radius == pytest.approx(np.sqrt(2))
    assert Ball([1.0], 3.0).enclosing_radius == 3.0
    assert Simplex(3).enclosing_radius == pytest.approx(np.sqrt(2 / 3))
    # every vertex of the simplex lies within R of the centroid
    s = Simplex(4)
    assert np.linalg.norm(np.eye(4) - s.centroid(), axis=1).max() <= s.enclosing_radius + 1e-12


@pytest.mark.parametrize("fset", [Box([-1.0, 0.0], [1.0, 2.0]), Ball([0.5, -0.5], 2.0), Simplex(3)])
def test_samples_are_feasible(fset, rng):
    for p in fset.sample(rng, 50):
        assert fset.contains(p)


@pytest.mark.parametrize("fset", [Unconstrained(2), Box([-1.0], [2.0]), Ball([0.0, 1.0], 2.0), Simplex(3)])
def test_dict_roundtrip(fset):
    back = set_from_dict(fset.to_dict())
    assert type(back) is type(fset)
    assert back.to_dict() == fset.to_dict()


@settings(max_examples=60, deadline=None)
@given(arrays(float, 3, elements=finite))
def test_projection_is_idempotent_and_feasible(v):
    for fset in (Box([-1.0, 0.0, -2.0], [1.0, 3.0, 0.0]), Ball([0.0, 1.0, 0.0], 1.5), Simplex(3)):
        p = fset.project(v)
        assert fset.contains(p)
        np.testing.assert_allclose(fset.project(p), p, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
def test_projection_is_nonexpansive(u, v):
    for fset in (Box([-1.0] * 3, [1.0] * 3), Ball([0.0] * 3, 1.0), Simplex(3)):
        d = np.linalg.norm(fset.project(u) - fset.project(v))
        assert d <= np.linalg.norm(u - v) + 1e-9


# linear minimization over (set - center) intersected with the unit ball

def test_local_min_unconstrained():
    res = linear_min_local(Unconstrained(2), [0.0, 0.0], [3.0, 4.0])
    np.testing.assert_allclose(res.direction, [-0.6, -0.8])
    assert res.value == pytest.approx(-5.0)


def test_local_min_outward_gradient_at_boundary():
    res = linear_min_local(Box([-1.0], [1.0]), [1.0], [-2.0])
    np.testing.assert_allclose(res.direction, [0.0])
    assert res.value == 0.0


def test_local_min_interior_box_endpoint():
    res = linear_min_local(Box([-1.0], [1.0]), [0.5], [-1.0])
    np.testing.assert_allclose(res.direction, [0.5])
    assert res.value == pytest.approx(-0.5)


def test_local_min_zero_gradient():
    res = linear_min_local(Simplex(3), np.ones(3) / 3, np.zeros(3))
    assert res.value == 0.0


def test_infeasible_center_warns_and_projects():
    with pytest.warns(InfeasiblePointWarning):
        res = linear_min_local(Box([-1.0], [1.0]), [2.0], [-1.0])
    assert res.value == 0.0


def _grid_oracle_2d(fset, x, g, n=801):
    # dense polar grid of the unit disk, filtered by feasibility
    r = np.linspace(0, 1, n // 4)
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    R, P = np.meshgrid(r, phi)
    S = np.stack([R.ravel() * np.cos(P.ravel()), R.ravel() * np.sin(P.ravel())], axis=1)
    pts = x + S
    if isinstance(fset, Box):
        ok = np.all((pts >= fset.lower - 1e-12) & (pts <= fset.upper + 1e-12), axis=1)
    else:
        ok = np.linalg.norm(pts - fset.center, axis=1) <= fset.radius + 1e-12
    return (S[ok] @ g).min()


@pytest.mark.parametrize("fset", [Box([-1.0, -1.0], [1.0, 1.0]), Ball([0.0, 0.0], 1.2)])
def test_local_min_matches_grid_oracle_2d(fset, rng):
    for _ in range(6):
        x = fset.project(rng.uniform(-1.5, 1.5, 2))
        g = rng.normal(size=2)
        res = linear_min_local(fset, x, g)
        assert fset.contains(x + res.direction, tol=1e-8)
        assert np.linalg.norm(res.direction) <= 1 + 1e-9
        oracle = _grid_oracle_2d(fset, x, g)
        # the grid is a restriction, so the exact value can only be lower
        assert res.value <= oracle + 1e-9
        assert res.value >= oracle - 5e-3


def test_local_min_simplex_matches_lp_vertices(rng):
    # for a polytope, the optimum of a linear objective over (P - x) ∩ unit ball is
    # at least as good as the best feasible segment toward any vertex
    s = Simplex(3)
    for _ in range(20):
        x = s.project(rng.normal(size=3))
        g = rng.normal(size=3)
        res = linear_min_local(s, x, g)
        assert s.contains(x + res.direction, tol=1e-8)
        assert np.linalg.norm(res.direction) <= 1 + 1e-9
        for v in np.eye(3):
            d = v - x
            nd = np.linalg.norm(d)
            if nd > 0:
                assert res.value <= min(g @ d / max(nd, 1.0), 0.0) + 1e-9


@settings(max_examples=40, deadline=None)
@given(arrays(float, 2, elements=st.floats(-3, 3)), arrays(float, 2, elements=st.floats(-5, 5)))
def test_local_min_value_bounds(x, g):
    fset = Box([-1.0, -2.0], [1.0, 0.5])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InfeasiblePointWarning)
        res = linear_min_local(fset, x, g)
    assert -np.linalg.norm(g) - 1e-9 <= res.value <= 0.0
