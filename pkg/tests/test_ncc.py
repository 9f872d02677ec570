import math
import warnings

import numpy as np
import pytest

from minimax_fne.errors import ConfigurationError, InvalidInputError
from minimax_fne.geometry import Box, Simplex
from minimax_fne.harness.diagnostics import finite_diff_grad
from minimax_fne.ncc import (
    FW,
    PGD,
    ConcavityWarning,
    NccConfig,
    apga,
    apga_blocks,
    check_concavity,
    ncc_iteration_counts,
    outer_step_fw,
    outer_step_pgd,
    regularize,
    solve_ncc,
)
from minimax_fne.oracle import ProblemOracle, RateConstants
from minimax_fne.problems import (
    abs_value_game,
    fair_classification_problem,
    quadratic_groups,
    quadratic_saddle,
    simplex_inner_argmax,
)


def concave_quadratic(Q, b, aset):
    """Inner objective -a'Qa/2 + b'a with a dummy one-dimensional theta."""
    return ProblemOracle(
        f=lambda th, a: float(-0.5 * a @ Q @ a + b @ a),
        grad_theta=lambda th, a: np.zeros(1),
        grad_alpha=lambda th, a: -Q @ a + b,
        theta_set=Box([-1.0], [1.0]), alpha_set=aset,
        l11=0.0, l12=0.0, l22=float(np.linalg.eigvalsh(Q).max()), name="concave_quadratic",
    )


def box_qp_optimum(Q, b, lo, hi, iters=20000):
    step = 1.0 / np.linalg.eigvalsh(Q).max()
    x = np.clip(np.zeros(len(b)), lo, hi)
    for _ in range(iters):
        x = np.clip(x + step * (-Q @ x + b), lo, hi)
    return x


def test_regularized_value_and_gradient(rng):
    p = abs_value_game()
    o = regularize(p, 0.7, [0.25])
    for th, a in zip(p.theta_set.sample(rng, 20), p.alpha_set.sample(rng, 20)):
        assert o.f(th, a) == pytest.approx(p.f(th, a) - 0.35 * (a[0] - 0.25) ** 2, abs=1e-12)
        fd = finite_diff_grad(lambda y: o.f(th, y), a)
        np.testing.assert_allclose(o.grad_alpha(th, a), fd, atol=1e-4)


def test_regularized_example_value():
    o = regularize(abs_value_game(), 1.0, [0.5])
    assert o.f([0.3], [1.0]) == pytest.approx(0.3 - 0.125)


def test_regularization_vanishes_at_anchor():
    p = quadratic_saddle()
    o = regularize(p, 3.0, [0.7])
    assert o.f([0.2], [0.7]) == p.f([0.2], [0.7])


def test_tiny_lambda_approaches_base():
    p = abs_value_game()
    o = regularize(p, 1e-12, [0.5])
    assert o.f([0.4], [0.9]) == pytest.approx(p.f([0.4], [0.9]), abs=1e-12)


def test_regularize_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        regularize(abs_value_game(), 0.0)
    with pytest.raises(InvalidInputError):
        regularize(abs_value_game(), 1.0, [2.0])


def test_default_anchor_is_centroid():
    o = regularize(fair_classification_problem(quadratic_groups([-1.0, 0.0, 1.0])), 0.1)
    np.testing.assert_allclose(o.alpha_bar, np.ones(3) / 3)


def test_derived_constants():
    o = regularize(quadratic_saddle(), 0.5)
    assert o.l22_reg == pytest.approx(2.5)
    assert o.L_g == pytest.approx(2.0 + 16.0 / 0.5)


def test_apga_first_step_hits_constrained_maximizer():
    # h(a) = -(a-2)^2/2 on [0,1]
    p = concave_quadratic(np.eye(1), np.array([2.0]), Box([0.0], [1.0]))
    out = list(apga_blocks(p, [0.0], [0.0], 1.0, 3, 6))
    for x in out:
        np.testing.assert_allclose(x, [1.0])


def test_apga_block_count():
    p = concave_quadratic(np.eye(1), np.array([0.3]), Box([-1.0], [1.0]))
    assert len(list(apga_blocks(p, [0.0], [0.0], 1.0, 4, 0))) == 1
    assert len(list(apga_blocks(p, [0.0], [0.0], 1.0, 4, 9))) == 3


def test_apga_iterates_feasible(rng):
    Q = np.diag([0.1, 2.0, 5.0])
    p = concave_quadratic(Q, rng.normal(size=3) * 10, Simplex(3))
    for x in apga_blocks(p, [0.0], np.ones(3) / 3, 0.2, 5, 50):
        assert Simplex(3).contains(x)


def test_apga_symmetric_quadratic_rate():
    c = np.array([0.2, -0.3])
    p = concave_quadratic(np.eye(2) * 0.5, 0.5 * c, Box([-1.0, -1.0], [1.0, 1.0]))
    # curvature 0.5 in every direction, so with step 1/0.5 the first step is exact; use a
    # smaller step to exercise momentum
    eta, lam, L = 0.25, 0.5, 4.0
    N = int(math.floor(math.sqrt(8 * L / lam)))
    x0 = np.array([0.9, 0.9])
    gap0 = p.f(0, c) - p.f(0, x0)
    for K in (N, 2 * N, 4 * N):
        gap = p.f(0, c) - p.f(0, apga(p, [0.0], x0, eta, N, K))
        assert gap <= 0.5 ** (K / N) * gap0 + 1e-12


def test_apga_restart_contraction_random_box_quadratics(rng):
    for _ in range(5):
        U, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        eig = np.array([0.2, 4.0, rng.uniform(0.2, 4.0)])
        Q = U @ np.diag(eig) @ U.T
        b = rng.normal(size=3) * 3
        lo, hi = -np.ones(3), np.ones(3)
        p = concave_quadratic(Q, b, Box(lo, hi))
        fstar = p.f(0, box_qp_optimum(Q, b, lo, hi))
        N = int(math.floor(math.sqrt(8 * 4.0 / 0.2)))
        a0 = rng.uniform(-1, 1, 3)
        prev = fstar - p.f(0, a0)
        for x in apga_blocks(p, [0.0], a0, 0.25, N, 6 * N):
            gap = fstar - p.f(0, x)
            assert gap <= (0.5 + 1e-3) * prev + 1e-12
            prev = gap


def test_outer_step_pgd_fixed_point_and_clamp():
    o = regularize(abs_value_game(), 4.0, [0.5])
    # alpha = 0.5 gives grad_theta = 0
    np.testing.assert_allclose(outer_step_pgd(o, [0.3], [0.5]), [0.3])
    # alpha = 1 gives grad_theta = 1 = L_g, so theta moves by a full unit then clamps
    assert o.L_g == pytest.approx(1.0)
    np.testing.assert_allclose(outer_step_pgd(o, [0.0], [1.0]), [-1.0])


def test_outer_step_pgd_needs_positive_smoothness():
    p = ProblemOracle(lambda th, a: 0.0, lambda th, a: np.zeros(1), lambda th, a: np.zeros(1),
                      Box([-1.0], [1.0]), Box([-1.0], [1.0]), l11=0.0, l12=0.0, l22=0.0)
    with pytest.raises(ConfigurationError):
        outer_step_pgd(regularize(p, 1.0), [0.0], [0.0])


def test_outer_step_fw_example():
    # abs game at alpha = 0: grad_theta = -1
    o = regularize(abs_value_game(), 1.0, [0.5])
    theta, x_t = outer_step_fw(o, [0.5], [0.0], 2.0)
    assert x_t == pytest.approx(0.5)
    np.testing.assert_allclose(theta, [0.625])


def test_outer_step_fw_stationary():
    o = regularize(abs_value_game(), 1.0, [0.5])
    theta, x_t = outer_step_fw(o, [0.2], [0.5], 2.0)
    assert x_t == 0.0
    np.testing.assert_allclose(theta, [0.2])


def test_outer_step_fw_rejects_small_l_tilde():
    o = regularize(abs_value_game(), 1.0, [0.5])
    with pytest.raises(ConfigurationError):
        outer_step_fw(o, [0.0], [1.0], 0.1)


def test_concavity_check():
    rng = np.random.default_rng(0)
    assert check_concavity(abs_value_game(), rng) == 0
    assert check_concavity(quadratic_saddle(), rng) > 0


def test_solve_warns_on_convex_inner_problem():
    cfg = NccConfig.for_problem(quadratic_saddle(), 1e-3, T=1, lam=4.0)
    with pytest.warns(ConcavityWarning):
        solve_ncc(quadratic_saddle(), cfg)


@pytest.mark.parametrize("rule", [PGD, FW])
def test_abs_game_reaches_fne(rule):
    p = abs_value_game()
    cfg = NccConfig.for_problem(p, 0.05, T=10_000, outer_rule=rule, theta0=[0.8], alpha0=[1.0],
                                stop_at_eps=True)
    best = solve_ncc(p, cfg).best
    assert best.x_measure <= 0.05 and best.y_measure <= 0.05
    assert abs(best.theta[0]) <= 0.1


def test_single_outer_iteration_gives_one_record():
    p = abs_value_game()
    assert len(solve_ncc(p, NccConfig.for_problem(p, 0.05, T=1))) == 1


def test_records_measure_original_objective():
    p = abs_value_game()
    cfg = NccConfig.for_problem(p, 0.05, T=5, theta0=[0.8], alpha0=[1.0])
    o = regularize(p, cfg.lam)
    for r in solve_ncc(p, cfg).records:
        assert r.f_value == pytest.approx(p.f(r.theta, r.alpha))
        assert r.g_lambda_value == pytest.approx(o.f(r.theta, r.alpha))


def test_best_so_far_monotone():
    p = abs_value_game()
    cfg = NccConfig.for_problem(p, 0.05, T=200, theta0=[0.9], alpha0=[0.0])
    assert np.all(np.diff(solve_ncc(p, cfg).best_so_far()) <= 0)


def test_exact_inner_option():
    p = abs_value_game()
    cfg = NccConfig.for_problem(p, 0.05, T=2000, theta0=[0.8], exact_inner=True, stop_at_eps=True)
    assert solve_ncc(p, cfg).best.worst <= 0.05


def test_fair_quadratic_weights_match_kkt():
    data = quadratic_groups([-1.0, 0.0, 1.0])
    p = fair_classification_problem(data)
    lam = 0.1
    cfg = NccConfig.for_problem(p, 0.01, K=50, T=3000, lam=lam, theta0=[0.8], outer_step=0.005,
                                stop_at_eps=True)
    best = solve_ncc(p, cfg).best
    ref = simplex_inner_argmax(data.group_losses(best.theta) + lam * np.ones(3) / 3, lam)
    np.testing.assert_allclose(best.alpha, ref, atol=1e-4)
    assert abs(best.theta[0]) < 0.01
    assert data.group_losses(best.theta).max() == pytest.approx(1.0, abs=0.02)


def _g_lambda(o, th):
    return o.f(th, o.exact_inner(th))


def test_regularized_danskin(rng):
    o = regularize(abs_value_game(), 0.3, [0.5])
    for th in rng.uniform(-1, 1, 10):
        th = np.array([th])
        fd = finite_diff_grad(lambda x: _g_lambda(o, x), th)
        np.testing.assert_allclose(fd, o.grad_theta(th, o.exact_inner(th)), atol=1e-4)


def test_regularized_value_is_smooth(rng):
    o = regularize(abs_value_game(), 0.3, [0.5])
    for t1, t2 in rng.uniform(-1, 1, (20, 2)):
        g1 = finite_diff_grad(lambda x: _g_lambda(o, x), np.array([t1]))
        g2 = finite_diff_grad(lambda x: _g_lambda(o, x), np.array([t2]))
        assert abs(g1[0] - g2[0]) <= (o.L_g + 1e-4) * abs(t1 - t2) + 1e-6


def test_regularized_stability(rng):
    lam = 3.0
    o = regularize(abs_value_game(), lam, [0.5])
    for t1, t2 in rng.uniform(-1, 1, (20, 2)):
        d = np.linalg.norm(o.exact_inner([t1]) - o.exact_inner([t2]))
        assert d <= (o.l12 / lam + 1e-12) * abs(t1 - t2)


def test_regularization_bias(rng):
    p = abs_value_game()
    lam = 0.2
    o = regularize(p, lam)
    R = p.alpha_set.enclosing_radius
    for th in rng.uniform(-1, 1, 20):
        assert abs(_g_lambda(o, [th]) - p.value([th])) <= lam / 2 * (2 * R) ** 2 + 1e-12


def test_config_invariants():
    with pytest.raises(InvalidInputError):
        NccConfig(eps=0.1, lam=0.1, eta=1.0, N=4, K=3, T=1)
    with pytest.raises(InvalidInputError):
        NccConfig(eps=0.1, lam=0.0, eta=1.0, N=1, K=1, T=1)
    with pytest.raises(InvalidInputError):
        NccConfig(eps=0.1, lam=0.1, eta=1.0, N=1, K=1, T=1, outer_rule="newton")


def test_default_schedule():
    cfg = NccConfig.for_problem(abs_value_game(), 0.05)
    # R = 0.5 for [0, 1]
    assert cfg.lam == pytest.approx(0.025)
    assert cfg.N == 2 and cfg.K >= cfg.N


def _consts(l22=0.8, R=1.0):
    return RateConstants.for_ncc(1.0, 1.0, l22, 0.1, R, 1.0, 1.0, 1.0)


def test_iteration_counts_example():
    counts = ncc_iteration_counts(_consts(), 0.4)
    assert counts.lam == pytest.approx(0.1)
    assert counts.N == 8


def test_fw_outer_count_scales_inverse_square_for_fixed_constants():
    # T_FW = 8 L_tilde Delta / eps^2 with L_tilde recomputed from lam; compare the formula
    c = _consts()
    for eps in (0.2, 0.1):
        lam = eps / 4
        L = c.l11 + c.l12**2 / lam
        expected = math.ceil(8 * max(L, c.l12, c.g_max) * c.Delta / eps**2 - 1e-9)
        assert ncc_iteration_counts(c, eps, FW).T == expected


def test_inner_count_grows_like_inverse_sqrt_eps():
    c = _consts()
    k1 = ncc_iteration_counts(c, 1e-2).K
    k2 = ncc_iteration_counts(c, 1e-4).K
    # sqrt(100) = 10 from kappa, times a log factor below 4
    assert 10 <= k2 / k1 <= 40


def test_iteration_counts_reject_bad_eps():
    with pytest.raises(InvalidInputError):
        ncc_iteration_counts(_consts(), 1.5)
    with pytest.raises(InvalidInputError):
        ncc_iteration_counts(_consts(), 0.1, "newton")
