#!/usr/bin/env python3
"""
Tests for surjection combinatorics, stratification tables and bound arithmetic.
"""

import sys
from itertools import product

import pytest

from flatstrata_errors import GenusTooSmall, InvalidSurjection, ParamOutOfRange, SizeMismatch
from strata_covers import (
    Surjection,
    aut_order,
    cohdim_bounds,
    compose,
    cover_adaptedness_probe,
    enumerate_lex,
    equivalent,
    full_collapse,
    identity,
    is_strictly_decreasing,
    leq,
    parse_sigma,
    pushforward_m,
    stratification_depth,
    stratification_table,
    strict_chains,
)
from surface_generators import marked_slit_tori


def brute_force_lex(n: int, k: int, l: int):
    found = set()
    for tail in product(range(1, n + l + 1), repeat=k):
        images = tuple(range(1, n + 1)) + tail
        if set(images) != set(range(1, n + l + 1)):
            continue
        sigma = Surjection(n, images)
        if sigma.is_lexicographic():
            found.add(images)
    return sorted(found)


def test_stirling_counts():
    assert len(enumerate_lex(0, 4, 2)) == 7
    assert len(enumerate_lex(0, 4, 1)) == 1
    assert len(enumerate_lex(0, 3, 3)) == 1
    assert len(enumerate_lex(0, 5, 3)) == 25


def test_enumeration_with_prefix():
    found = [s.images for s in enumerate_lex(1, 2, 1)]
    assert found == [(1, 1, 2), (1, 2, 1), (1, 2, 2)]


def test_enumeration_matches_brute_force():
    for n, k in ((0, 3), (1, 2), (1, 3), (2, 2)):
        for l in range(k + 1):
            assert [s.images for s in enumerate_lex(n, k, l)] == brute_force_lex(n, k, l)


def test_invalid_surjections():
    with pytest.raises(InvalidSurjection):
        Surjection(1, (2, 1))
    with pytest.raises(InvalidSurjection):
        Surjection(0, (1, 3))
    with pytest.raises(InvalidSurjection):
        parse_sigma("1,x", 0)


def test_normalize():
    assert Surjection(0, (2, 1)).normalize().images == (1, 2)
    assert Surjection(1, (1, 3, 2, 3)).normalize().images == (1, 2, 3, 2)
    assert not Surjection(0, (2, 1)).is_lexicographic()


def test_pushforward():
    assert pushforward_m(Surjection(0, (1, 1)), (1, 1)) == (2,)
    assert pushforward_m(Surjection(1, (1, 2, 1)), (0, 1, 1)) == (1, 1)
    with pytest.raises(SizeMismatch):
        pushforward_m(Surjection(0, (1, 1)), (1, 1, 0))


def test_order_extremes():
    for n, k in ((0, 3), (1, 3), (1, 2)):
        top, bottom = identity(n, k), full_collapse(n, k)
        for l in range(k + 1):
            for s in enumerate_lex(n, k, l):
                assert leq(s, top)
                assert leq(bottom, s)


def test_order_axioms():
    nodes = [s for l in range(4) for s in enumerate_lex(1, 3, l)]
    for a in nodes:
        assert leq(a, a)
        for b in nodes:
            if leq(a, b) and leq(b, a):
                assert equivalent(a, b)
            for c in nodes:
                if leq(a, b) and leq(b, c):
                    assert leq(a, c)


def test_compose_is_below():
    sigma = identity(0, 3)
    tau = Surjection(0, (1, 1, 2))
    composed = compose(tau, sigma)
    assert composed.images == (1, 1, 2)
    assert leq(composed, sigma)
    with pytest.raises(SizeMismatch):
        leq(identity(0, 2), identity(1, 2))


def test_aut_order():
    assert aut_order(0, (1, 1, 2)) == 2
    assert aut_order(1, (0, 1, 1, 1)) == 6
    assert aut_order(0, (4,)) == 1


def test_cohdim_bounds():
    assert cohdim_bounds(2, 0) == {
        "moduli_bound": 2,
        "hodge_bound": 3,
        "strata_bound": 2,
        "depth": 1,
        "harer": 3,
        "looijenga_conjecture": 0,
        "moduli_dimension": 3,
        "de_rham_lower_bound": 0,
    }
    for g in range(2, 8):
        for n in range(4):
            record = cohdim_bounds(g, n)
            assert record["hodge_bound"] == record["strata_bound"] + record["depth"]
    with pytest.raises(GenusTooSmall):
        cohdim_bounds(1, 0)
    with pytest.raises(ParamOutOfRange):
        cohdim_bounds(2, -1)


def test_stratification_table_genus_two():
    table = stratification_table(2, 0)
    assert list(table.columns) == ["depth", "signature", "aut_order", "proj_dimension"]
    assert table.to_dict(orient="records") == [
        {"depth": 0, "signature": "(1,1)", "aut_order": 2, "proj_dimension": 4},
        {"depth": 1, "signature": "(2)", "aut_order": 1, "proj_dimension": 3},
    ]


def test_stratification_table_genus_three():
    table = stratification_table(3, 0)
    assert table["depth"].max() == stratification_depth(3, 0)
    assert list(table.loc[table["depth"] == 2, "signature"]) == ["(2,2)", "(3,1)"]
    assert list(table.loc[table["depth"] == 3, "signature"]) == ["(4)"]
    with pytest.raises(GenusTooSmall):
        stratification_table(1, 2)


def test_chains_reach_depth():
    assert len(strict_chains(0, 2)) == 3
    assert max(len(c) for c in strict_chains(0, 2)) - 1 == stratification_depth(2, 0)
    assert max(len(c) for c in strict_chains(1, 2)) - 1 == stratification_depth(2, 1)
    for chain in strict_chains(1, 2):
        assert is_strictly_decreasing(chain)


def test_incomparable_covers_are_disjoint():
    samples = [marked_slit_tori(t, x) for t, x in ((0.01, 0.5), (0.02, 0.03), (0.2, 0.6), (0.005, 0.012))]
    report = cover_adaptedness_probe(samples, Surjection(1, (1, 1, 2)), Surjection(1, (1, 2, 1)))
    assert not report.comparable
    assert report.samples == 4
    assert report.joint == 0
    assert report.consistent


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
