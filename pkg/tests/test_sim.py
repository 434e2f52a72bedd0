import math

import numpy as np
import pytest

from metricconf.ci import ConfidenceInterval
from metricconf.correl import CorrelationSpec, system_level
from metricconf.numerics import RngStream
from metricconf.sim import (
    SyntheticWorld,
    coverage_simulation,
    degrade,
    draw_split,
    generate_exchangeable_world,
    generate_world,
    power_simulation,
    proportions_z_test,
)


class TestWorld:
    def test_lambda_one_no_noise(self):
        X, Z = generate_world(SyntheticWorld(n_systems=6, n_inputs=4, noise_sd=0.0, lam=1.0, seed=3))
        assert np.array_equal(X.values, Z.values)

    def test_same_seed(self):
        w = SyntheticWorld(seed=12)
        assert generate_world(w) == generate_world(w)
        assert generate_world(w)[0] != generate_world(SyntheticWorld(seed=13))[0]

    def test_lambda_zero_uncorrelated(self):
        rs = np.array([system_level(*generate_world(SyntheticWorld(10, 5, lam=0.0, seed=s))).value
                       for s in range(500)])
        assert abs(rs.mean()) <= 3 * rs.std(ddof=1) / math.sqrt(len(rs))

    def test_exchangeable_shares_x_and_z(self):
        w = SyntheticWorld(8, 5, seed=4)
        X, Z = generate_world(w)
        X2, Y, Z2 = generate_exchangeable_world(w)
        assert np.array_equal(X.values, X2.values) and np.array_equal(Z.values, Z2.values)
        assert not np.array_equal(X2.values, Y.values)

    @pytest.mark.parametrize("kw", [dict(n_systems=3), dict(n_inputs=1), dict(lam=1.5),
                                    dict(noise_sd=-1.0), dict(metric_noise_sd=-0.1)])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SyntheticWorld(**kw)


class TestSplit:
    @pytest.mark.parametrize("n,m", [(4, 2), (7, 5), (20, 40)])
    def test_partition(self, n, m):
        plan = draw_split(n, m, RngStream(5, 1))
        assert len(plan.systems_a) == n // 2 and len(plan.inputs_a) == m // 2
        assert sorted(plan.systems_a + plan.systems_b) == list(range(n))
        assert sorted(plan.inputs_a + plan.inputs_b) == list(range(m))

    def test_uniform_membership(self):
        hits = np.zeros(6)
        for t in range(3000):
            hits[list(draw_split(6, 2, RngStream(0, t)).systems_a)] += 1
        # each system lands in A with probability 1/2
        assert np.all(np.abs(hits / 3000 - 0.5) < 5 * math.sqrt(0.25 / 3000))


class TestCoverage:
    def test_universal_stub(self):
        X, Z = generate_world(SyntheticWorld(8, 6, seed=1))

        def everything(xa, za, seed):
            return ConfidenceInterval(-1.0, 1.0, 0.05, 0.0, "stub")

        rep = coverage_simulation(X, Z, everything, trials=50)
        assert rep.proportion == 1.0 and rep.contained == rep.trials == 50

    @pytest.mark.parametrize("method", ["boot-both", "boot-systems", "boot-inputs"])
    def test_identical_matrices(self, method):
        X = np.random.default_rng(0).normal(size=(8, 6))
        rep = coverage_simulation(X, X, method, CorrelationSpec("sum"), trials=20, k=100, seed=2)
        assert rep.proportion == 1.0

    def test_identical_matrices_fisher(self):
        # Fisher refuses r = 1, so every split is retried until the budget runs out
        X = np.random.default_rng(0).normal(size=(8, 6))
        with pytest.raises(RuntimeError):
            coverage_simulation(X, X, "fisher", trials=2)

    def test_deterministic_and_parallel(self):
        X, Z = generate_world(SyntheticWorld(10, 8, seed=5))
        a = coverage_simulation(X, Z, "boot-both", trials=30, k=100, seed=4)
        b = coverage_simulation(X, Z, "boot-both", trials=30, k=100, seed=4, workers=8)
        assert a == b and 0 <= a.proportion <= 1

    def test_retry_budget(self):
        X = np.random.default_rng(0).normal(size=(6, 4))
        Z = np.ones((6, 4))
        with pytest.raises(RuntimeError, match="retries"):
            coverage_simulation(X, Z, "boot-both", trials=1, k=100, max_retries=2)

    def test_errors(self):
        X = np.random.default_rng(0).normal(size=(3, 4))
        with pytest.raises(ValueError):
            coverage_simulation(X, X, "fisher")
        Y = np.random.default_rng(0).normal(size=(6, 4))
        with pytest.raises(ValueError):
            coverage_simulation(Y, Y, "fisher", trials=0)


class TestProportions:
    def test_equal(self):
        assert proportions_z_test(50, 100, 500, 1000) == 0.5

    def test_hand_example(self):
        # pooled 0.55, se = sqrt(.55 * .45 * 2 / 1000), z = 0.1 / se
        z = 0.1 / math.sqrt(0.55 * 0.45 * 0.002)
        assert z == pytest.approx(4.494, abs=1e-3)
        assert proportions_z_test(600, 1000, 500, 1000) == pytest.approx(3.5e-6, abs=1e-7)

    @pytest.mark.parametrize("c1,n1,c2,n2", [(600, 1000, 500, 1000), (7, 10, 3, 12), (0, 5, 2, 5)])
    def test_antisymmetry(self, c1, n1, c2, n2):
        assert proportions_z_test(c1, n1, c2, n2) + proportions_z_test(c2, n2, c1, n1) == pytest.approx(1.0, abs=1e-15)

    def test_zero_variance(self):
        assert proportions_z_test(0, 10, 0, 20) == 0.5
        assert proportions_z_test(10, 10, 20, 20) == 0.5

    def test_invalid(self):
        with pytest.raises(ValueError):
            proportions_z_test(11, 10, 1, 10)
        with pytest.raises(ValueError):
            proportions_z_test(0, 0, 1, 10)


class TestPower:
    def setup_method(self):
        self.X, self.Z = generate_world(SyntheticWorld(10, 8, lam=0.7, seed=2))

    def test_identical_metric_never_rejected(self):
        curves = power_simulation(self.X, self.Z, [100], ["perm-both", "paired-boot", "williams"],
                                  trials=20, k=100, seed=1)
        assert [c.power for c in curves] == [[0.0], [0.0], [0.0]]

    def test_shape_and_counts(self):
        curves = power_simulation(self.X, self.Z, [0, 50, 100], "perm-systems", trials=10, k=100)
        (c,) = curves
        assert c.k_percent == [0.0, 50.0, 100.0] and len(c.rejections) == 3
        assert all(0 <= p <= 1 for p in c.power)

    def test_parallel_identical(self):
        a = power_simulation(self.X, self.Z, [0, 60], ["perm-both", "paired-boot"], trials=12, k=100, seed=3)
        b = power_simulation(self.X, self.Z, [0, 60], ["perm-both", "paired-boot"], trials=12, k=100, seed=3,
                             workers=8)
        assert a == b

    def test_full_degradation_detected(self):
        (c,) = power_simulation(self.X, self.Z, [0], "perm-both", CorrelationSpec("sum"), trials=1000, k=200)
        assert c.power[0] >= 0.9

    def test_degrade(self):
        rng = np.random.default_rng(0)
        X = self.X.values
        assert np.array_equal(degrade(X, 100, rng), X)
        noise = degrade(X, 0, np.random.default_rng(1))
        assert abs(noise.mean() - X.mean()) < 0.5 and abs(noise.std() / X.std() - 1) < 0.3

    @pytest.mark.parametrize("kw", [dict(trials=0), dict(levels=[]), dict(levels=[120])])
    def test_errors(self, kw):
        args = dict(levels=[0, 50], tests="perm-both", trials=5, k=100)
        args.update(kw)
        with pytest.raises(ValueError):
            power_simulation(self.X, self.Z, **args)
        with pytest.raises(ValueError):
            power_simulation(np.ones((10, 8)), self.Z, [0], "perm-both", trials=5, k=100)
