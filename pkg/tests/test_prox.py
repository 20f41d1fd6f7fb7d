"""Scaled proximal operators, calculus combinators, and the numeric oracle."""

import numpy as np
import pytest

from vmpg.core import BlockDiagonalMetric, DiagonalMetric
from vmpg.prox import (
    AffineAddition,
    BlockSeparable,
    Consensus,
    DiagonalAffineComposition,
    ElasticNet,
    GroupLasso,
    Lasso,
    Nonnegative,
    QuadraticRegularized,
    Scaled,
    Simplex,
    Zero,
    moreau_check,
    numeric_prox_oracle,
)


def metric(diag):
    return DiagonalMetric(np.asarray(diag, dtype=float))


class TestLasso:
    def test_hand_thresholds(self):
        out = Lasso(1.0).prox(np.array([3.0, -0.5]), metric([1.0, 2.0]))
        np.testing.assert_allclose(out, [2.0, 0.0])

    def test_vanishing_penalty_returns_input(self):
        v = np.array([1.5, -2.5])
        out = Lasso(1e-14).prox(v, metric([1.0, 1.0]))
        np.testing.assert_allclose(out, v, atol=1e-13)

    def test_zero_is_fixed_point(self):
        out = Lasso(1.0).prox(np.zeros(2), metric([3.0, 4.0]))
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_rejects_nonpositive_lam(self):
        with pytest.raises(ValueError):
            Lasso(0.0)


class TestGroupLasso:
    def test_hand_shrinkage(self):
        g = GroupLasso(5.0, [(0, 2)])
        out = g.prox(np.array([3.0, 4.0]), metric([2.0, 2.0]))
        np.testing.assert_allclose(out, [1.5, 2.0])

    def test_full_shrinkage_zeroes_group(self):
        g = GroupLasso(20.0, [(0, 2)])
        out = g.prox(np.array([3.0, 4.0]), metric([2.0, 2.0]))
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_single_size_one_group_matches_lasso(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.standard_normal(1) * 3
            u = rng.uniform(0.2, 5.0, 1)
            lam = rng.uniform(0.1, 2.0)
            a = GroupLasso(lam, [(0, 1)]).prox(v, metric(u))
            b = Lasso(lam).prox(v, metric(u))
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_zero_group_maps_to_zero(self):
        out = GroupLasso(1.0, [(0, 2)]).prox(np.zeros(2), metric([1.0, 1.0]))
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_nonscalar_metric_rejected(self):
        with pytest.raises(ValueError):
            GroupLasso(1.0, [(0, 2)]).prox(np.ones(2), metric([1.0, 2.0]))


class TestElasticNet:
    def test_hand_value(self):
        out = ElasticNet(1.0, 1.0).prox(np.array([3.0]), metric([1.0]))
        np.testing.assert_allclose(out, [1.0])

    def test_small_quadratic_term_approaches_lasso(self):
        rng = np.random.default_rng(1)
        v = rng.standard_normal(5) * 2
        u = rng.uniform(0.5, 3.0, 5)
        a = ElasticNet(0.7, 1e-12).prox(v, metric(u))
        b = Lasso(0.7).prox(v, metric(u))
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_zero_input(self):
        out = ElasticNet(1.0, 1.0).prox(np.zeros(3), metric([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out, np.zeros(3))


class TestNonnegative:
    def test_clips_negative_coordinates(self):
        out = Nonnegative().prox(np.array([-1.0, 2.0]), metric([5.0, 0.5]))
        np.testing.assert_array_equal(out, [0.0, 2.0])

    def test_feasible_point_is_fixed(self):
        v = np.array([0.5, 1.5])
        np.testing.assert_array_equal(Nonnegative().prox(v, metric([1, 1])), v)

    def test_all_negative(self):
        out = Nonnegative().prox(np.array([-5.0, -5.0]), metric([1, 1]))
        np.testing.assert_array_equal(out, np.zeros(2))


class TestSimplex:
    def test_point_on_simplex_is_fixed(self):
        out = Simplex().prox(np.array([0.5, 0.5]), metric([1.0, 1.0]))
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-11)

    def test_hand_solved_pivot(self):
        out = Simplex().prox(np.array([2.0, 0.0]), metric([1.0, 1.0]))
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-11)

    def test_dimension_one_returns_the_vertex(self):
        out = Simplex().prox(np.array([-3.7]), metric([2.0]))
        np.testing.assert_allclose(out, [1.0], atol=1e-11)

    def test_output_constraints_and_kkt(self):
        """Nonnegative, unit sum, and a common multiplier on the support."""
        rng = np.random.default_rng(2)
        g = Simplex()
        for _ in range(100):
            n = int(rng.integers(1, 12))
            v = rng.standard_normal(n) * 3
            u = rng.uniform(0.1, 10.0, n)
            out = g.prox(v, metric(u))
            assert np.all(out >= 0)
            assert abs(float(np.sum(out)) - 1.0) <= 1e-10
            support = out > 0
            nus = u[support] * (v[support] - out[support])
            assert np.ptp(nus) <= 1e-8 if nus.size > 1 else True


class TestConsensus:
    def test_weighted_average(self):
        g = Consensus(2)
        big = BlockDiagonalMetric([metric([1.0]), metric([3.0])])
        out = g.prox(np.array([0.0, 4.0]), big)
        np.testing.assert_allclose(out, [3.0, 3.0])

    def test_equal_metrics_give_plain_average(self):
        rng = np.random.default_rng(3)
        v = rng.standard_normal(6)
        big = DiagonalMetric(np.full(6, 2.0))
        out = Consensus(3).prox(v, big)
        avg = v.reshape(3, 2).mean(axis=0)
        np.testing.assert_allclose(out, np.tile(avg, 3), rtol=1e-12)

    def test_single_block_is_identity(self):
        v = np.array([1.0, -2.0])
        out = Consensus(1).prox(v, metric([4.0, 0.25]))
        np.testing.assert_array_equal(out, v)

    def test_indecomposable_length_rejected(self):
        with pytest.raises(ValueError):
            Consensus(2).prox(np.ones(3), metric([1, 1, 1]))


class TestZero:
    def test_prox_is_identity_and_value_zero(self):
        v = np.array([3.0, -1.0])
        g = Zero()
        np.testing.assert_array_equal(g.prox(v, metric([2.0, 2.0])), v)
        assert g.value(v) == 0.0


class TestMoreauIdentity:
    def test_zero_regularizer_residual_is_zero(self):
        x = np.array([1.0, -2.0, 0.5])
        assert moreau_check(Zero(), metric([1.0, 2.0, 0.5]), x) <= 1e-14

    def test_lasso_and_nonnegative_spot_checks(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(1, 8))
            x = rng.standard_normal(n) * 2
            u = metric(rng.uniform(0.2, 5.0, n))
            assert moreau_check(Lasso(rng.uniform(0.1, 2.0)), u, x) <= 1e-8
            assert moreau_check(Nonnegative(), u, x) <= 1e-8

    def test_unsupported_regularizer_rejected(self):
        with pytest.raises(ValueError):
            moreau_check(Simplex(), metric([1.0]), np.array([1.0]))


class TestFirmNonexpansiveness:
    def test_prox_contracts_in_metric_norm(self):
        """||prox(a) - prox(b)||_U <= ||a - b||_U for every operator."""
        rng = np.random.default_rng(5)
        n = 6
        ops = [
            Lasso(0.8),
            GroupLasso(0.8, [(0, 3), (3, 6)]),
            ElasticNet(0.5, 0.7),
            Nonnegative(),
            Simplex(),
            Consensus(2),
            Zero(),
        ]
        for g in ops:
            for _ in range(50):
                u = rng.uniform(0.2, 5.0, n)
                if isinstance(g, GroupLasso):
                    u[0:3] = u[0]
                    u[3:6] = u[3]
                um = metric(u)
                a = rng.standard_normal(n) * 2
                b = rng.standard_normal(n) * 2
                da = g.prox(a, um) - g.prox(b, um)
                assert um.norm(da) <= um.norm(a - b) + 1e-10


class TestSeparability:
    def test_blockwise_prox_equals_joint(self):
        rng = np.random.default_rng(6)
        g = BlockSeparable([(Lasso(0.5), 3), (Nonnegative(), 2), (Zero(), 2)])
        for _ in range(100):
            v = rng.standard_normal(7) * 2
            u = rng.uniform(0.2, 5.0, 7)
            joint = g.prox(v, metric(u))
            parts = [
                Lasso(0.5).prox(v[:3], metric(u[:3])),
                Nonnegative().prox(v[3:5], metric(u[3:5])),
                Zero().prox(v[5:], metric(u[5:])),
            ]
            np.testing.assert_array_equal(joint, np.concatenate(parts))


class TestCalculusCombinators:
    def test_scaling_rule(self):
        """prox of a*phi under U equals prox of phi under U/a."""
        rng = np.random.default_rng(7)
        for _ in range(50):
            v = rng.standard_normal(4) * 2
            u = rng.uniform(0.2, 5.0, 4)
            a = Scaled(Lasso(1.0), 2.0).prox(v, metric(u))
            b = Lasso(2.0).prox(v, metric(u))
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_affine_addition_rule(self):
        """Adding <a, x> shifts the prox point by U^{-1} a."""
        rng = np.random.default_rng(8)
        for _ in range(50):
            v = rng.standard_normal(4) * 2
            u = rng.uniform(0.2, 5.0, 4)
            a = rng.standard_normal(4)
            um = metric(u)
            lhs = AffineAddition(Lasso(0.7), a).prox(v, um)
            rhs = Lasso(0.7).prox(v - a / u, um)
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_quadratic_regularization_reproduces_elastic_net(self):
        """l1 plus a quadratic-about-zero term equals the elastic net prox."""
        rng = np.random.default_rng(9)
        lam1, lam2 = 0.9, 1.3
        for _ in range(50):
            v = rng.standard_normal(4) * 2
            u = rng.uniform(0.2, 5.0, 4)
            combined = QuadraticRegularized(
                Lasso(lam1), np.zeros(4), DiagonalMetric(np.full(4, lam2))
            )
            a = combined.prox(v, metric(u))
            b = ElasticNet(lam1, lam2).prox(v, metric(u))
            np.testing.assert_allclose(a, b, atol=1e-9)
            np.testing.assert_allclose(combined.value(v), ElasticNet(lam1, lam2).value(v), atol=1e-9)

    def test_diagonal_affine_composition_matches_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            n = 3
            a = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
            b = rng.standard_normal(n)
            g = DiagonalAffineComposition(Lasso(0.6), a, b)
            v = rng.standard_normal(n) * 2
            u = rng.uniform(0.3, 4.0, n)
            closed = g.prox(v, metric(u))
            ref = numeric_prox_oracle(g, v, metric(u))
            np.testing.assert_allclose(closed, ref, atol=1e-6)

    def test_composition_rejects_singular_scaling(self):
        with pytest.raises(ValueError):
            DiagonalAffineComposition(Lasso(1.0), np.array([1.0, 0.0]))


class TestNumericOracle:
    def test_zero_returns_input_exactly(self):
        v = np.array([1.0, -2.0])
        out = numeric_prox_oracle(Zero(), v, metric([1.0, 3.0]))
        np.testing.assert_array_equal(out, v)

    def test_lasso_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 6))
            v = rng.standard_normal(n) * 2
            u = rng.uniform(0.2, 5.0, n)
            lam = rng.uniform(0.1, 2.0)
            closed = Lasso(lam).prox(v, metric(u))
            ref = numeric_prox_oracle(Lasso(lam), v, metric(u))
            np.testing.assert_allclose(closed, ref, atol=1e-6)

    def test_simplex_instances(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            v = rng.standard_normal(n) * 2
            u = rng.uniform(0.2, 5.0, n)
            closed = Simplex().prox(v, metric(u))
            ref = numeric_prox_oracle(Simplex(), v, metric(u))
            np.testing.assert_allclose(closed, ref, atol=1e-6)
