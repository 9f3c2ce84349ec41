"""Gini index: closed-form cases, the sparsity axioms, and map extraction."""

import numpy as np
import pytest

from causalvox import (
    DetectionResult,
    InvalidParameterError,
    UndefinedSparsityError,
    gini_index,
    map_gini,
)


def random_vectors(count, rng, size_range=(2, 40)):
    for _ in range(count):
        n = int(rng.integers(*size_range))
        kind = rng.integers(0, 3)
        if kind == 0:
            v = rng.random(n)
        elif kind == 1:
            v = rng.exponential(1.0, n)
        else:
            v = np.abs(rng.standard_normal(n)) * (rng.random(n) < 0.7)
        if v.sum() == 0:
            v[0] = 1.0
        yield v


class TestClosedForms:
    def test_uniform_vector_is_exactly_zero(self):
        assert gini_index([1.0, 1.0, 1.0, 1.0]) == 0.0

    def test_uniform_near_zero_for_other_sizes(self):
        for n in (2, 3, 5, 17, 100):
            assert gini_index(np.full(n, 3.7)) == pytest.approx(0.0, abs=1e-12)

    def test_one_hot_of_four_is_exactly_three_quarters(self):
        # hand evaluation: 1 - 2 * (1) * ((4 - 4 + 0.5) / 4) = 0.75
        assert gini_index([0.0, 0.0, 0.0, 1.0]) == 0.75

    def test_one_hot_general_size(self):
        for n in (2, 5, 10, 64):
            v = np.zeros(n)
            v[0] = 7.0
            assert gini_index(v) == pytest.approx(1.0 - 1.0 / n, abs=1e-12)

    def test_result_range(self):
        rng = np.random.default_rng(0)
        for v in random_vectors(200, rng):
            g = gini_index(v)
            assert 0.0 <= g <= 1.0 - 1.0 / v.size + 1e-12


class TestAxioms:
    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        for v in random_vectors(100, rng):
            base = gini_index(v)
            for c in (1e-6, 0.5, 3.0, 1e6):
                assert gini_index(c * v) == pytest.approx(base, abs=1e-12)

    def test_cloning_invariance(self):
        rng = np.random.default_rng(2)
        for v in random_vectors(100, rng):
            doubled = np.concatenate([v, v])
            assert gini_index(doubled) == pytest.approx(gini_index(v), abs=1e-9)

    def test_robin_hood_transfer_strictly_decreases(self):
        rng = np.random.default_rng(3)
        for v in random_vectors(100, rng):
            hi = int(np.argmax(v))
            lo = int(np.argmin(v))
            if v[hi] == v[lo]:
                continue
            delta = 0.25 * (v[hi] - v[lo])
            moved = v.copy()
            moved[hi] -= delta
            moved[lo] += delta
            assert gini_index(moved) < gini_index(v)

    def test_adding_constant_strictly_decreases(self):
        rng = np.random.default_rng(4)
        for v in random_vectors(100, rng):
            if np.ptp(v) == 0:
                continue
            assert gini_index(v + 1.0) < gini_index(v)
            assert gini_index(v + 0.01 * v.max()) < gini_index(v)

    def test_zero_padding_strictly_increases(self):
        rng = np.random.default_rng(5)
        for v in random_vectors(100, rng):
            padded = np.concatenate([v, [0.0]])
            assert gini_index(padded) > gini_index(v)

    def test_one_growing_component_approaches_max_from_below(self):
        v = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        n = v.size
        previous = gini_index(v)
        for scale in (10.0, 1e2, 1e4, 1e6, 1e9):
            grown = v.copy()
            grown[-1] = scale
            current = gini_index(grown)
            assert current > previous
            assert current < 1.0 - 1.0 / n
            previous = current
        assert previous == pytest.approx(1.0 - 1.0 / n, abs=1e-6)

    def test_permutation_invariance_is_exact(self):
        rng = np.random.default_rng(6)
        for v in random_vectors(100, rng):
            assert gini_index(rng.permutation(v)) == gini_index(v)

    def test_tie_order_irrelevant(self):
        v = np.array([2.0, 1.0, 2.0, 1.0, 2.0])
        assert gini_index(v) == gini_index(np.sort(v))


class TestValidation:
    def test_all_zero_raises_undefined(self):
        with pytest.raises(UndefinedSparsityError):
            gini_index(np.zeros(5))

    def test_negative_rejected(self):
        with pytest.raises(InvalidParameterError):
            gini_index([1.0, -0.5])

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            gini_index([])


def result(statistic, active, p=0.01):
    return DetectionResult(
        statistic=statistic, p_value=p if active else 0.5, active=active
    )


class TestMapGini:
    def test_single_active_voxel(self):
        results = [result(0.0, False)] * 3 + [result(2.5, True)]
        assert map_gini(results) == 0.75

    def test_uniform_active_map_is_zero(self):
        results = [result(1.3, True)] * 4
        assert map_gini(results) == pytest.approx(0.0, abs=1e-12)

    def test_default_mode_zeroes_inactive_statistics(self):
        # an inactive voxel with a nonzero statistic contributes 0 by default
        results = [result(5.0, False), result(5.0, False), result(2.0, True)]
        assert map_gini(results) == pytest.approx(1.0 - 1.0 / 3.0, abs=1e-12)

    def test_statistic_mode_keeps_raw_magnitudes(self):
        results = [result(5.0, False), result(5.0, False), result(5.0, True)]
        assert map_gini(results, "statistic") == pytest.approx(0.0, abs=1e-12)

    def test_active_only_mode_restricts_the_vector(self):
        results = [result(9.0, False), result(1.0, True), result(1.0, True)]
        assert map_gini(results, "active-only") == pytest.approx(0.0, abs=1e-12)

    def test_all_inactive_map_is_undefined_with_counts(self):
        results = [result(3.0, False)] * 5
        with pytest.raises(UndefinedSparsityError) as exc:
            map_gini(results)
        assert "0 active of 5" in str(exc.value)

    def test_bad_mode_rejected(self):
        with pytest.raises(InvalidParameterError):
            map_gini([result(1.0, True)], "banana")

    def test_empty_map_rejected(self):
        with pytest.raises(InvalidParameterError):
            map_gini([])
