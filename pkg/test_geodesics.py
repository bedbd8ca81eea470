#!/usr/bin/env python3
"""
Tests for saddle-connection enumeration, distances, systoles and the greedy basis.
"""

import math
import sys
from math import gcd

import numpy as np
import pytest

from flatstrata_errors import BudgetExceeded, ParamOutOfRange, RankDeficient, SizeMismatch
from geodesics import (
    SaddleConnectionFinder,
    convex_pieces,
    distance,
    distance_matrix,
    enumerate_saddles,
    greedy_max_basis,
    shortest_loop,
    systole,
)
from homology_periods import class_of, homology_basis
from run_config import RunConfig
from surface_core import _signed_area, rescale
from surface_generators import marked_slit_tori, regular_octagon, slit_tori, square_torus, two_point_torus


def primitive_vectors(max_length: float) -> int:
    bound = int(math.floor(max_length))
    return sum(
        1
        for a in range(-bound, bound + 1)
        for b in range(-bound, bound + 1)
        if (a, b) != (0, 0) and gcd(a, b) == 1 and a * a + b * b <= max_length ** 2 + 1e-9
    )


def test_square_torus_counts():
    surface = square_torus()
    assert len(enumerate_saddles(surface, 1.0)) == 4
    assert len(enumerate_saddles(surface, 1.5)) == 8
    assert len(enumerate_saddles(surface, 2.3)) == 16


def test_square_torus_matches_primitive_vectors():
    surface = square_torus()
    for L in (3.0, 5.5, 6.5):
        assert len(enumerate_saddles(surface, L)) == primitive_vectors(L)


def test_enumeration_sorted_and_bounded():
    found = enumerate_saddles(regular_octagon(), 3.0)
    assert found
    lengths = [sc.length for sc in found]
    assert lengths == sorted(lengths)
    assert max(lengths) <= 3.0 + 1e-9
    for sc in found:
        assert abs(sc.holonomy) == pytest.approx(sc.length)


def test_keys_are_unique():
    found = enumerate_saddles(slit_tori(0.3), 2.0)
    assert len({sc.key for sc in found}) == len(found)


def test_keys_separate_end_corners():
    found = enumerate_saddles(slit_tori(0.3), 1.2)
    slits = [sc for sc in found if abs(sc.holonomy - 0.3) < 1e-9]
    diagonals = [sc for sc in found if abs(sc.holonomy - (0.3 + 1j)) < 1e-9]
    assert slits and diagonals
    assert not {sc.key for sc in slits} & {sc.key for sc in diagonals}


def test_upper_half_picks_one_of_each_pair():
    found = enumerate_saddles(regular_octagon(), 2.5)
    upper = [sc for sc in found if sc.upper_half]
    lower = [sc for sc in found if not sc.upper_half]
    assert len(upper) == len(lower) == len(found) // 2

    def rounded(z):
        return (round(z.real, 9) + 0.0, round(z.imag, 9) + 0.0)

    assert sorted(rounded(sc.holonomy) for sc in upper) == sorted(rounded(-sc.holonomy) for sc in lower)


def test_enumeration_scales():
    surface = regular_octagon()
    base = enumerate_saddles(surface, 2.5)
    scaled = enumerate_saddles(rescale(surface, 2.0), 5.0)
    assert len(scaled) == len(base)
    assert [sc.length for sc in scaled] == pytest.approx([2 * sc.length for sc in base])


def test_systoles():
    assert systole(square_torus())[0] == pytest.approx(1.0)
    assert systole(regular_octagon())[0] == pytest.approx(1.0)
    assert systole(slit_tori(0.3))[0] == pytest.approx(0.3)


def test_distances():
    surface = two_point_torus(0.25)
    assert distance(surface, 0, 1) == pytest.approx(0.25)
    assert distance(surface, 0, 0) == 0.0
    matrix = distance_matrix(surface)
    assert np.allclose(matrix, matrix.T)
    assert matrix[0, 1] == pytest.approx(0.25)


def test_distance_triangle_inequality():
    for surface in (marked_slit_tori(0.2, 0.5), two_point_torus(0.25), slit_tori(0.3)):
        matrix = distance_matrix(surface)
        marks = range(surface.num_marks)
        for i in marks:
            for j in marks:
                for k in marks:
                    assert matrix[i, k] <= matrix[i, j] + matrix[j, k] + 1e-9


def test_distance_rejects_bad_index():
    with pytest.raises(ParamOutOfRange):
        distance(two_point_torus(0.25), 0, 2)
    with pytest.raises(ParamOutOfRange):
        distance(two_point_torus(0.25), -1, 0)


def test_enumerate_rejects_bad_length():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ParamOutOfRange):
            enumerate_saddles(square_torus(), bad)


def test_shortest_loop():
    assert shortest_loop(square_torus()) == pytest.approx(1.0)
    assert shortest_loop(regular_octagon()) == pytest.approx(1.0)


def test_convex_pieces_cover_polygon():
    poly = [0j, 2 + 0j, 2 + 1j, 1 + 1j, 1 + 2j, 2j]
    pieces = convex_pieces(poly, 1e-12)
    assert len(pieces) >= 2
    total = sum(_signed_area([poly[i] for i in piece]) for piece in pieces)
    assert total == pytest.approx(_signed_area(poly))


def test_greedy_basis_on_square_torus():
    surface = square_torus()
    chart = homology_basis(surface)
    pool = enumerate_saddles(surface, 2.3)
    weights = [sc.length ** -2 for sc in pool]
    basis, total = greedy_max_basis(pool, weights, lambda sc: class_of(surface, chart, sc), 2)
    assert len(basis) == 2
    assert total == pytest.approx(2.0)


def test_greedy_basis_rank_deficient():
    surface = square_torus()
    chart = homology_basis(surface)
    pool = [sc for sc in enumerate_saddles(surface, 1.0) if abs(sc.holonomy.imag) < 1e-9]
    with pytest.raises(RankDeficient):
        greedy_max_basis(pool, [1.0] * len(pool), lambda sc: class_of(surface, chart, sc), 2)


def test_greedy_basis_weight_count_checked():
    surface = square_torus()
    chart = homology_basis(surface)
    pool = enumerate_saddles(surface, 1.5)
    with pytest.raises(SizeMismatch):
        greedy_max_basis(pool, [1.0], lambda sc: class_of(surface, chart, sc), 2)


def test_node_budget():
    finder = SaddleConnectionFinder(regular_octagon(), RunConfig(node_budget=10_000))
    with pytest.raises(BudgetExceeded):
        finder.enumerate(60.0)


def run_all_tests() -> bool:
    tests = [obj for name, obj in sorted(globals().items()) if name.startswith("test_") and callable(obj)]
    passed = 0
    for test in tests:
        try:
            test()
            print(f"✅ {test.__name__}")
            passed += 1
        except Exception as e:
            print(f"❌ {test.__name__}: {type(e).__name__}: {e}")
    print("\n" + "=" * 50)
    print(f"🏁 Test Summary: {passed}/{len(tests)} tests passed")
    return passed == len(tests)


if __name__ == "__main__":
    sys.exit(0 if run_all_tests() else 1)
