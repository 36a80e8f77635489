import itertools

import numpy as np
import pytest

from app.coding.gf2 import BinMatrix, random_matrix, same_rowspace
from app.coding.tanner import (
    FourCycle,
    TannerGraph,
    count_4cycles,
    enumerate_4cycles,
    equivalent_matrices,
    reduce_column_weights,
    remove_4cycles,
)

OVERLAPPING_CHECKS = BinMatrix([[1, 1, 1, 1, 0, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 1, 1, 1]])


def brute_force_cycles(h: BinMatrix):
    """Every (column pair, row pair) whose four entries are all ones."""
    bits = h.bits
    found = []
    for c_a, c_b in itertools.combinations(range(h.rows), 2):
        for v_a, v_b in itertools.combinations(range(h.cols), 2):
            if bits[c_a, v_a] and bits[c_a, v_b] and bits[c_b, v_a] and bits[c_b, v_b]:
                found.append(FourCycle(v_a, v_b, c_a, c_b))
    return found


class TestFourCycles:
    def test_all_ones_square(self):
        h = BinMatrix([[1, 1], [1, 1]])
        assert count_4cycles(h) == 1
        assert enumerate_4cycles(h) == [FourCycle(0, 1, 0, 1)]

    def test_cycle_free(self):
        h = BinMatrix([[1, 1, 0], [0, 1, 1]])
        assert count_4cycles(h) == 0
        assert enumerate_4cycles(h) == []

    def test_count_matches_brute_force(self, rng):
        for density in (0.2, 0.4, 0.6):
            h = random_matrix(8, 16, rng, density=density)
            expected = brute_force_cycles(h)
            assert enumerate_4cycles(h) == expected
            assert count_4cycles(h) == len(expected)

    def test_overlapping_checks_example(self):
        assert enumerate_4cycles(OVERLAPPING_CHECKS) == [FourCycle(2, 3, 0, 1)]
        assert count_4cycles(OVERLAPPING_CHECKS) == 1

    def test_tanner_graph(self):
        graph = TannerGraph(BinMatrix([[1, 1, 0], [0, 1, 1]]))
        assert graph.variable_nodes == 3 and graph.check_nodes == 2
        assert graph.edges == [(0, 0), (0, 1), (1, 1), (1, 2)]
        assert graph.variable_degree(1) == 2
        assert graph.check_degree(0) == 2
        assert graph.has_edge(1, 2) and not graph.has_edge(0, 2)


class TestRemoveFourCycles:
    def test_square_becomes_cycle_free(self):
        h = BinMatrix([[1, 1], [1, 1]])
        out = remove_4cycles(h)
        assert count_4cycles(out) == 0
        assert same_rowspace(h, out)

    def test_heavy_row_is_thinned(self):
        out = remove_4cycles(OVERLAPPING_CHECKS)
        assert count_4cycles(out) == 0
        assert out.bits[0].tolist() == [1, 1, 0, 0, 0, 0]
        assert same_rowspace(OVERLAPPING_CHECKS, out)

    def test_never_worse_and_code_preserving(self, rng):
        for _ in range(10):
            h = random_matrix(10, 24, rng, density=0.35)
            out = remove_4cycles(h, max_passes=5)
            assert count_4cycles(out) <= count_4cycles(h)
            assert same_rowspace(h, out)

    def test_cycle_free_output_is_a_fixed_point(self, rng):
        out = remove_4cycles(OVERLAPPING_CHECKS)
        assert remove_4cycles(out) == out
        for _ in range(10):
            out = remove_4cycles(random_matrix(8, 24, rng, density=0.2), max_passes=10)
            if count_4cycles(out) == 0:
                assert remove_4cycles(out) == out
    def test_zero_passes_is_identity(self, rng):
        h = random_matrix(6, 12, rng)
        assert remove_4cycles(h, max_passes=0) == h


class TestColumnWeights:
    def test_lightest_incident_row_is_the_pivot(self):
        h = BinMatrix([[1, 1, 0], [1, 0, 1], [1, 1, 1]])
        result = reduce_column_weights(h, [0], max_weight=2)
        assert result.matrix.bits.tolist() == [[1, 1, 0], [0, 1, 1], [1, 1, 1]]
        assert result.achieved == {0: 2}
        assert result.shortfall == []
        assert same_rowspace(h, result.matrix)

    def test_targets_reach_weight_on_random_matrices(self, rng):
        h = random_matrix(12, 30, rng, density=0.5)
        targets = [3, 7, 11]
        result = reduce_column_weights(h, targets, max_weight=2)
        assert same_rowspace(h, result.matrix)
        for t in targets:
            assert result.achieved[t] == int(result.matrix.col_weights[t])
        assert set(result.shortfall) == {t for t, w in result.achieved.items() if w > 2}

    def test_bad_target(self):
        with pytest.raises(ValueError):
            reduce_column_weights(BinMatrix.identity(3), [3])


class TestEquivalentMatrices:
    def test_same_code(self, toy_code, rng):
        family = equivalent_matrices(toy_code.h, 4, rng)
        assert len(family) == 4
        assert family[0] == toy_code.h
        for h in family[1:]:
            assert same_rowspace(toy_code.h, h)
        assert len({h for h in family}) > 1

    def test_count_checked(self, toy_code, rng):
        with pytest.raises(ValueError):
            equivalent_matrices(toy_code.h, 0, rng)
