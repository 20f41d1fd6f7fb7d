"""Scalar BB values, hybrid safeguarding, and the diagonal BB metric."""

import numpy as np
import pytest

from vmpg.core import DiagonalMetric
from vmpg.stepsize import (
    BBConfig,
    StepPair,
    StepsizeState,
    bb1,
    bb2,
    diagonal_bb,
    hybrid_bb,
)


def pair(s, y):
    return StepPair(np.asarray(s, dtype=float), np.asarray(y, dtype=float))


def state(prev_alpha=1.0, prev_diag=None, n=2):
    metric = (
        DiagonalMetric(np.asarray(prev_diag, dtype=float))
        if prev_diag is not None
        else DiagonalMetric.identity(n)
    )
    return StepsizeState(prev_alpha=prev_alpha, prev_metric=metric)


class TestScalarBB:
    def test_bb1_hessian_two_i(self):
        assert bb1(pair([1, 0], [2, 0])) == 0.5

    def test_bb1_hand_computation(self):
        np.testing.assert_allclose(bb1(pair([1, 1], [1, 3])), 0.5)

    def test_bb1_orthogonal_pair_is_degenerate(self):
        assert bb1(pair([1, 0], [0, 1])) is None

    def test_bb1_zero_step_is_degenerate(self):
        assert bb1(pair([0, 0], [1, 1])) is None

    def test_bb2_hessian_two_i(self):
        assert bb2(pair([1, 0], [2, 0])) == 0.5

    def test_bb2_hand_computation(self):
        np.testing.assert_allclose(bb2(pair([1, 1], [1, 3])), 0.4)

    def test_bb2_orthogonal_pair_is_degenerate(self):
        assert bb2(pair([1, 0], [0, 1])) is None

    def test_bb2_zero_gradient_change_is_degenerate(self):
        assert bb2(pair([1, 1], [0, 0])) is None

    def test_bb_bounds_on_random_quadratics(self):
        """1/L <= bb2 <= bb1 <= 1/m for strongly convex quadratics."""
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
            eigs = rng.uniform(0.5, 50.0, n)
            hess = (basis * eigs) @ basis.T
            m, big_l = eigs.min(), eigs.max()
            a = rng.standard_normal(n)
            b = rng.standard_normal(n)
            sp = pair(a - b, hess @ (a - b))
            lo, hi = bb2(sp), bb1(sp)
            assert 1.0 / big_l - 1e-9 <= lo <= hi <= 1.0 / m + 1e-9


class TestHybridBB:
    def test_branch_one_takes_short_value(self):
        # bb1 = 0.5, bb2 = 0.4 and 0.5 < 2 * 0.4: hybrid returns bb2
        alpha = hybrid_bb(pair([1, 1], [1, 3]), BBConfig(), state())
        np.testing.assert_allclose(alpha, 0.4)

    def test_branch_two_takes_long_combination(self):
        # Construct bb1 = 1.0, bb2 = 0.4: s'y = ||s||^2 and ||y||^2 = s'y/0.4.
        # With s = (1, 1): need y with y1+y2 = 2 and y1^2+y2^2 = 5 -> y = (2, 0)...
        # y=(2,0): s'y=2=||s||^2 ok, ||y||^2=4 -> bb2=0.5. Use s=(1,1,0), y=(1,1,sqrt(3)) instead:
        # s'y = 2, ||s||^2 = 2 -> bb1 = 1; ||y||^2 = 1+1+3 = 5 -> bb2 = 0.4; 1 >= 0.8 -> 1 - 0.2 = 0.8.
        sp = pair([1, 1, 0], [1, 1, np.sqrt(3.0)])
        np.testing.assert_allclose(bb1(sp), 1.0)
        np.testing.assert_allclose(bb2(sp), 0.4)
        alpha = hybrid_bb(sp, BBConfig(), state(n=3))
        np.testing.assert_allclose(alpha, 0.8)

    def test_degenerate_falls_back_to_previous(self):
        alpha = hybrid_bb(pair([1, 0], [0, 1]), BBConfig(), state(prev_alpha=0.7))
        assert alpha == 0.7

    def test_result_clamped_to_safeguard_interval(self):
        cfg = BBConfig(alpha_min=1e-2, alpha_max=1e2)
        # huge bb values from a nearly flat objective
        alpha = hybrid_bb(pair([1e6, 0], [1e-6, 0]), cfg, state())
        assert alpha <= 1e2
        alpha = hybrid_bb(pair([1e-6, 0], [1e6, 0]), cfg, state())
        assert alpha >= 1e-2


class TestDiagonalBB:
    def test_hand_evaluated_clamping(self):
        """Candidates (1, 3) clamp into the BB bound interval [2, 2.5]."""
        cfg = BBConfig(mu=1e-15)
        metric = diagonal_bb(pair([1, 1], [1, 3]), cfg, state())
        np.testing.assert_allclose(metric.diag, [2.0, 2.5], rtol=1e-9)

    def test_grid_search_oracle_on_bound_box(self):
        """Dense grid over the feasible box confirms the closed form."""
        sp = pair([1, 1], [1, 3])
        cfg = BBConfig(mu=1e-15)
        st = state()
        closed = diagonal_bb(sp, cfg, st).diag
        grid = np.arange(2.0, 2.5 + 1e-3, 1e-3)
        best, best_val = None, np.inf
        for u1 in grid:
            for u2 in grid:
                u = np.array([u1, u2])
                resid = u * sp.s - sp.y
                val = resid @ resid + cfg.mu * float(
                    (u - st.prev_metric.diag) @ (u - st.prev_metric.diag)
                )
                if val < best_val:
                    best, best_val = u, val
        np.testing.assert_allclose(closed, best, atol=2e-3)

    def test_exact_secant_gives_identity(self):
        metric = diagonal_bb(pair([1, 2], [1, 2]), BBConfig(mu=1e-15), state())
        np.testing.assert_allclose(metric.diag, [1.0, 1.0], rtol=1e-9)

    def test_huge_mu_copies_previous_metric(self):
        cfg = BBConfig(mu=1e12)
        metric = diagonal_bb(pair([1, 1], [1, 3]), cfg, state(prev_diag=[7.0, 7.0]))
        # bounds [2, 2.5] clamp the copied (7, 7)
        np.testing.assert_allclose(metric.diag, [2.5, 2.5], rtol=1e-6)

    def test_degenerate_pair_uses_global_safeguards(self):
        cfg = BBConfig(alpha_min=1e-4, alpha_max=1e4)
        metric = diagonal_bb(pair([1, 0], [0, 1]), cfg, state(prev_diag=[1.0, 1.0]))
        assert np.all(metric.diag >= 1.0 / 1e4 - 1e-15)
        assert np.all(metric.diag <= 1.0 / 1e-4 + 1e-9)
        assert np.all(np.isfinite(metric.diag))

    def test_output_within_bb_bounds(self):
        """Every coordinate lies in [1/bb1, 1/bb2] for nondegenerate pairs."""
        rng = np.random.default_rng(11)
        cfg = BBConfig()
        for _ in range(200):
            n = int(rng.integers(2, 9))
            s = rng.standard_normal(n)
            y = rng.standard_normal(n)
            if float(s @ y) <= 0:
                y = y - 2.0 * (float(s @ y) / float(s @ s)) * s + 0.5 * s
            if float(s @ y) <= 0:
                continue
            sp = pair(s, y)
            lo, hi = 1.0 / bb1(sp), 1.0 / bb2(sp)
            st = state(prev_diag=rng.uniform(0.1, 10.0, n))
            metric = diagonal_bb(sp, cfg, st)
            assert np.all(metric.diag >= lo - 1e-12)
            assert np.all(metric.diag <= hi + 1e-12)

    def test_never_nan_or_inf(self):
        rng = np.random.default_rng(13)
        cfg = BBConfig()
        scales = [1e-150, 1e-30, 1.0, 1e30, 1e150]
        for _ in range(100):
            n = int(rng.integers(1, 6))
            s = rng.standard_normal(n) * rng.choice(scales)
            y = rng.standard_normal(n) * rng.choice(scales)
            st = state(prev_diag=rng.uniform(0.5, 2.0, n))
            metric = diagonal_bb(pair(s, y), cfg, st)
            assert np.all(np.isfinite(metric.diag))
            assert np.all(metric.diag > 0)

    def test_secant_residual_dominates_hybrid_in_degenerate_case(self):
        """Near-orthogonal pairs: the diagonal fit beats the scalar fallback."""
        cfg = BBConfig(mu=1e-12)
        for s, y in [
            ([1.0, 0.0], [0.0, 1.0]),
            ([1.0, 1e-8], [1e-8, 1.0]),
            ([2.0, 0.0, 0.0], [0.0, 3.0, 1.0]),
        ]:
            sp = pair(s, y)
            st = state(prev_alpha=0.7, prev_diag=np.ones(len(s)))
            u_dbb = diagonal_bb(sp, cfg, st)
            alpha = hybrid_bb(sp, cfg, st)
            r_dbb = np.linalg.norm(u_dbb.apply(sp.s) - sp.y)
            r_bb = np.linalg.norm(sp.s / alpha - sp.y)
            assert r_dbb <= r_bb + 1e-12

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            diagonal_bb(pair([1, 1], [1, 3]), BBConfig(), state(n=3))


class TestConfigValidation:
    def test_bb_config_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            BBConfig(delta=1.0)

    def test_bb_config_rejects_bad_interval(self):
        with pytest.raises(ValueError):
            BBConfig(alpha_min=1.0, alpha_max=0.5)

    def test_initial_state_is_neutral(self):
        st = StepsizeState.initial(3)
        assert st.prev_alpha == 1.0
        np.testing.assert_array_equal(st.prev_metric.diag, np.ones(3))
