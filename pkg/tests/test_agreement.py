import itertools
import math

import numpy as np
import pytest

from phasekit.agreement import (adjusted_rand_index, lagged_ccf, minmax_scale,
                                normalized_mutual_information, pearson,
                                phase_agreement, partition_agreement)
from phasekit.errors import ConstantInput


class TestPearson:
    def test_identical(self, rng):
        a = rng.normal(size=20)
        assert pearson(a, a) == pytest.approx(1.0)

    def test_negated(self, rng):
        a = rng.normal(size=20)
        assert pearson(a, -a) == pytest.approx(-1.0)

    def test_matches_covariance_oracle(self, rng):
        a, b = rng.normal(size=30), rng.normal(size=30)
        expected = np.cov(a, b, ddof=1)[0, 1] / (np.std(a, ddof=1) * np.std(b, ddof=1))
        assert pearson(a, b) == pytest.approx(expected, abs=1e-12)

    def test_constant_rejected(self):
        with pytest.raises(ConstantInput):
            pearson(np.ones(10), np.arange(10.0))


class TestLaggedCcf:
    def test_shifted_series_found_at_positive_lag(self, rng):
        a = rng.normal(size=60)
        b = np.empty(60)
        b[2:] = a[:-2]      # b trails a by 2 months
        b[:2] = rng.normal(size=2)
        result = lagged_ccf(a, b, max_lag=4)
        assert result.best_lag == 2
        assert result.best_r > 0.9

    def test_zero_lag_equals_pearson(self, rng):
        a, b = rng.normal(size=40), rng.normal(size=40)
        result = lagged_ccf(a, b, max_lag=3)
        assert result.r[0] == pytest.approx(pearson(a, b), abs=1e-12)

    def test_max_lag_zero_reduces_to_pearson(self, rng):
        a, b = rng.normal(size=40), rng.normal(size=40)
        result = lagged_ccf(a, b, max_lag=0)
        assert list(result.r) == [0]
        assert result.best_lag == 0

    def test_independent_noise_insignificant_per_lag(self):
        # per-(seed, lag) insignificance runs at the nominal ~95% rate; a
        # joint all-13-lags requirement would only hold ~half the time
        inside = total = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=85), rng.normal(size=85)
            result = lagged_ccf(a, b, max_lag=6)
            for k in result.r:
                total += 1
                inside += abs(result.r[k]) < result.significance[k]
        assert inside / total >= 0.90

    def test_significance_bound_formula(self, rng):
        a, b = rng.normal(size=50), rng.normal(size=50)
        result = lagged_ccf(a, b, max_lag=2)
        assert result.significance[2] == pytest.approx(1.96 / math.sqrt(48))


class TestMinmax:
    def test_example(self):
        np.testing.assert_allclose(minmax_scale(np.array([2.0, 4.0, 6.0])),
                                   [0.0, 0.5, 1.0])

    def test_constant_rejected(self):
        with pytest.raises(ConstantInput):
            minmax_scale(np.full(5, 3.0))

    def test_order_preserving(self, rng):
        x = rng.normal(size=30)
        scaled = minmax_scale(x)
        np.testing.assert_array_equal(np.argsort(scaled), np.argsort(x))


class TestPhaseAgreement:
    def test_identical_sequences(self):
        result = phase_agreement(["a", "b", "a"], ["a", "b", "a"])
        assert result.raw_agreement == 1.0
        assert result.kappa == pytest.approx(1.0)

    def test_kappa_formula_identity(self, rng):
        p1 = rng.choice(["a", "b", "c"], size=200).tolist()
        p2 = rng.choice(["a", "b", "c"], size=200).tolist()
        result = phase_agreement(p1, p2)
        assert result.kappa == pytest.approx(
            (result.raw_agreement - result.chance_agreement)
            / (1 - result.chance_agreement), abs=1e-12)
        assert result.kappa <= result.raw_agreement + 1e-12

    def test_independent_balanced_near_zero(self, rng):
        p1 = rng.choice(["x", "y"], size=5000).tolist()
        p2 = rng.choice(["x", "y"], size=5000).tolist()
        assert abs(phase_agreement(p1, p2).kappa) < 0.05

    def test_confusion_sums_to_n(self, rng):
        p1 = rng.choice(["a", "b"], size=50).tolist()
        p2 = rng.choice(["a", "b"], size=50).tolist()
        result = phase_agreement(p1, p2)
        assert sum(result.confusion.values()) == 50

    def test_drop_label_variant(self):
        p1 = ["none", "a", "a", "b"]
        p2 = ["a", "a", "b", "b"]
        full = phase_agreement(p1, p2)
        dropped = phase_agreement(p1, p2, drop_label="none")
        assert full.n == 4
        assert dropped.n == 3
        assert dropped.raw_agreement == pytest.approx(2 / 3)


def ari_oracle(l1, l2):
    n = len(l1)
    same1 = [[l1[i] == l1[j] for j in range(n)] for i in range(n)]
    same2 = [[l2[i] == l2[j] for j in range(n)] for i in range(n)]
    a = b = c = d = 0
    for i in range(n):
        for j in range(i + 1, n):
            if same1[i][j] and same2[i][j]:
                a += 1
            elif same1[i][j]:
                b += 1
            elif same2[i][j]:
                c += 1
            else:
                d += 1
    total = a + b + c + d
    expected = (a + b) * (a + c) / total if total else 0.0
    maximum = ((a + b) + (a + c)) / 2
    if maximum == expected:
        return 1.0 if a == maximum else 0.0
    return (a - expected) / (maximum - expected)


def nmi_oracle(l1, l2):
    n = len(l1)
    cats1, cats2 = sorted(set(l1)), sorted(set(l2))

    def h(labels, cats):
        out = 0.0
        for c in cats:
            p = labels.count(c) / n
            out -= p * math.log(p)
        return out

    h1, h2 = h(list(l1), cats1), h(list(l2), cats2)
    if h1 + h2 == 0:
        return 1.0
    mi = 0.0
    for c1 in cats1:
        for c2 in cats2:
            joint = sum(1 for a, b in zip(l1, l2) if a == c1 and b == c2) / n
            if joint > 0:
                mi += joint * math.log(joint / ((l1.count(c1) / n) * (l2.count(c2) / n)))
    return mi / ((h1 + h2) / 2)


class TestPartitionAgreement:
    def test_identical_partitions(self):
        result = partition_agreement([0, 0, 1, 1, 2], [5, 5, 9, 9, 7])
        assert result.ari == pytest.approx(1.0)
        assert result.nmi == pytest.approx(1.0)

    def test_degenerate_convention(self):
        result = partition_agreement([0, 1, 2, 3], [0, 0, 0, 0])
        assert result.ari == 0.0
        assert result.nmi == 0.0

    def test_label_permutation_invariance(self, rng):
        l1 = rng.integers(0, 3, size=40).tolist()
        l2 = rng.integers(0, 3, size=40).tolist()
        base = partition_agreement(l1, l2)
        permuted = [(x + 1) % 3 for x in l1]
        again = partition_agreement(permuted, l2)
        assert again.ari == pytest.approx(base.ari, abs=1e-12)
        assert again.nmi == pytest.approx(base.nmi, abs=1e-12)

    def test_matches_bruteforce_small(self, rng):
        for _ in range(50):
            n = int(rng.integers(3, 11))
            l1 = rng.integers(0, 3, size=n).tolist()
            l2 = rng.integers(0, 3, size=n).tolist()
            assert adjusted_rand_index(l1, l2) == pytest.approx(ari_oracle(l1, l2),
                                                                abs=1e-12)
            assert normalized_mutual_information(l1, l2) == pytest.approx(
                nmi_oracle(l1, l2), abs=1e-12)

    def test_exhaustive_tiny(self):
        for l1 in itertools.product(range(2), repeat=4):
            for l2 in itertools.product(range(2), repeat=4):
                assert adjusted_rand_index(l1, l2) == pytest.approx(
                    ari_oracle(list(l1), list(l2)), abs=1e-12)

    def test_nmi_in_unit_interval(self, rng):
        l1 = rng.integers(0, 4, size=60).tolist()
        l2 = rng.integers(0, 4, size=60).tolist()
        assert 0.0 <= normalized_mutual_information(l1, l2) <= 1.0
