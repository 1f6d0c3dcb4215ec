import numpy as np
import pytest

from mlqueue.distributions import stream
from mlqueue.stats import EmpiricalDistribution, batch_ci, ks_distance, wasserstein1


def tiny(support, weights):
    return EmpiricalDistribution(np.asarray(support, float), np.asarray(weights, float))


class TestEmpiricalDistribution:
    def test_cdf_step_shape(self):
        d = tiny([0.0, 1.0, 2.0], [[1.0, 2.0, 1.0]])
        assert d.cdf(-0.5) == 0.0
        assert d.cdf(0.0) == pytest.approx(0.25)  # right-continuous at atoms
        assert d.cdf(0.5) == pytest.approx(0.25)
        assert d.cdf(1.0) == pytest.approx(0.75)
        assert d.cdf(10.0) == 1.0
        assert np.all(np.diff(d.cdf_values) >= 0)

    def test_moments(self):
        d = tiny([1.0, 3.0], [[1.0, 1.0]])
        assert d.mean() == 2.0
        assert d.moment(2) == 5.0
        assert d.var() == 1.0

    def test_mass_at(self):
        d = tiny([1.0, 3.0], [[1.0, 3.0]])
        assert d.mass_at(3.0) == pytest.approx(0.75)
        assert d.mass_at(2.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            tiny([1.0, 1.0], [[1.0, 1.0]])  # duplicate support
        with pytest.raises(ValueError):
            tiny([1.0, 2.0], [[1.0, -1.0]])  # negative weight
        with pytest.raises(ValueError):
            tiny([1.0], [[0.0]])  # no mass

    def test_from_samples(self):
        x = [3.0, 1.0, 1.0, 2.0]
        d = EmpiricalDistribution.from_samples(x)
        assert list(d.support) == [1.0, 2.0, 3.0]
        assert list(d.weights) == [2.0, 1.0, 1.0]

    def test_from_samples_batched(self):
        x = stream(1, 0).random(1000)
        d = EmpiricalDistribution.from_samples(x, batches=8)
        assert d.batches == 8
        assert d.total == 1000.0

    def test_merge_union_and_commutativity(self):
        a = tiny([0.0, 1.0], [[1.0, 1.0]])
        b = tiny([1.0, 2.0], [[2.0, 2.0]])
        ab = EmpiricalDistribution.merge([a, b])
        ba = EmpiricalDistribution.merge([b, a])
        assert list(ab.support) == [0.0, 1.0, 2.0]
        assert np.array_equal(ab.weights, ba.weights)
        assert ab.total == 6.0
        # associativity of the derived totals
        c = tiny([0.5], [[4.0]])
        abc = EmpiricalDistribution.merge([EmpiricalDistribution.merge([a, b]), c])
        acb = EmpiricalDistribution.merge([a, EmpiricalDistribution.merge([c, b])])
        assert np.array_equal(abc.weights, acb.weights)

    def test_batch_statistic_and_mean_ci(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
        d = EmpiricalDistribution(np.array([0.0, 1.0]), rows)
        means = d.batch_statistic(lambda s, w: float(np.sum(s * w) / w.sum()))
        assert means.size == 4
        m, se, half = d.mean_ci()
        assert 0.0 <= m <= 1.0 and se > 0 and half > se

    def test_cdf_se_shrinks(self):
        x = stream(2, 0).random(20_000)
        d = EmpiricalDistribution.from_samples(x, batches=16)
        se = d.cdf_se(np.array([0.5]))[0]
        assert 0.0 < se < 0.02


class TestBatchCi:
    def test_basic(self):
        m, se, half = batch_ci(np.array([1.0, 2.0, 3.0, 4.0]))
        assert m == 2.5
        assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
        assert half > 2.0 * se  # small-sample t quantile

    def test_degenerate(self):
        m, se, half = batch_ci(np.array([5.0]))
        assert m == 5.0 and np.isnan(se)


class TestDistances:
    def test_ks_self_is_zero(self):
        d = tiny([0.0, 1.0, 2.0], [[1.0, 2.0, 1.0]])
        assert ks_distance(d, d) == 0.0

    def test_ks_point_masses(self):
        a = tiny([0.0], [[1.0]])
        b = tiny([1.0], [[1.0]])
        assert ks_distance(a, b) == 1.0
        assert wasserstein1(a, b) == 1.0

    def test_ks_hand_value(self):
        a = tiny([0.0, 1.0], [[1.0, 1.0]])
        b = tiny([0.0, 1.0], [[1.0, 3.0]])
        # CDFs step 0.5/1.0 vs 0.25/1.0 at the same points
        assert ks_distance(a, b) == pytest.approx(0.25)
        assert wasserstein1(a, b) == pytest.approx(0.25)

    def test_ks_against_continuous_uses_both_sides(self):
        class Line:
            def cdf(self, x):
                return np.clip(np.asarray(x, float), 0.0, 1.0)

        d = tiny([0.5], [[1.0]])  # point mass at 1/2
        assert ks_distance(d, Line()) == pytest.approx(0.5)

    def test_ks_iid_exponential_magnitude(self):
        x = -np.log1p(-stream(3, 0).random(1_000_000))

        class ExpCdf:
            def cdf(self, t):
                return -np.expm1(-np.asarray(t, float))

            def quantile(self, p):
                return -np.log1p(-p)

        d = EmpiricalDistribution.from_samples(x)
        ks = ks_distance(d, ExpCdf())
        assert ks < 0.004  # DKW scale at one million draws
        w1 = wasserstein1(d, ExpCdf())
        assert w1 < 0.01

    def test_w1_between_steps_exact(self):
        a = tiny([0.0, 2.0], [[1.0, 1.0]])
        b = tiny([0.0, 2.0], [[1.0, 3.0]])
        # |F-G| = 0.25 on [0,2)
        assert wasserstein1(a, b) == pytest.approx(0.5)
