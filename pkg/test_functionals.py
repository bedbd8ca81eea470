#!/usr/bin/env python3
"""
Tests for the systolic functionals, the cover functionals and their error paths.
"""

import math
import sys

import numpy as np
import pytest

from flatstrata_errors import BadFlag, ChainNotDecreasing, NotInCover, SizeMismatch, ZetaOutOfDomain
from functionals import (
    FunctionalEvaluator,
    chi,
    chi_properties,
    cover_constant,
    signed_class,
)
from geodesics import enumerate_saddles, greedy_max_basis, shortest_loop
from homology_periods import class_of, deform, homology_basis
from numerics_hessian import random_deformation_points
from strata_covers import Surjection, full_collapse, identity
from surface_core import area, rescale
from surface_generators import rect_torus, regular_octagon, slit_tori, square_torus

evaluator = FunctionalEvaluator()

COLLAPSE = Surjection(0, (1, 1))
IDENTITY_2 = Surjection(0, (1, 2))


def test_square_torus_values():
    ell = evaluator.ell_inv2_B(square_torus())
    assert ell.value == pytest.approx(2.0)
    assert sorted(sc.length for sc in ell.witness) == pytest.approx([1.0, 1.0])
    assert evaluator.exh_m(square_torus()).value == pytest.approx(math.log(2.0))


def test_rect_torus_values():
    for h in (0.5, 2.0, 3.0):
        surface = rect_torus(1.0, h)
        assert evaluator.ell_inv2_B(surface).value == pytest.approx(1 + 1 / h ** 2)
        assert evaluator.exh_m(surface).value == pytest.approx(math.log(h + 1 / h))


def test_witness_weights_sum_to_value():
    ell = evaluator.ell_inv2_B(regular_octagon())
    assert len(ell.witness) == 4
    assert sum(ell.weights) == pytest.approx(ell.value)


def test_exh_m_scale_invariant():
    octagon = regular_octagon()
    base = evaluator.exh_m(octagon).value
    for lam in (2.0, 1j, 0.3 + 0.4j):
        assert evaluator.exh_m(rescale(octagon, lam)).value == pytest.approx(base, abs=1e-9)
        scaled = evaluator.ell_inv2_B(rescale(octagon, lam)).value
        assert scaled == pytest.approx(evaluator.ell_inv2_B(octagon).value / abs(lam) ** 2, rel=1e-9)


def test_greedy_beats_random_bases():
    surface = regular_octagon()
    chart = homology_basis(surface)
    best = evaluator.ell_inv2_B(surface).value
    pool = enumerate_saddles(surface, 2.5)
    rng = np.random.default_rng(11)
    for _ in range(50):
        order = rng.permutation(len(pool))
        picked, vectors = [], []
        for i in order:
            vec = class_of(surface, chart, pool[i])
            if np.linalg.matrix_rank(np.array(vectors + [vec])) > len(vectors):
                vectors.append(vec)
                picked.append(pool[i])
            if len(picked) == chart.d:
                break
        if len(picked) == chart.d:
            assert sum(sc.length ** -2 for sc in picked) <= best + 1e-12


def test_witness_key_ignores_orientation():
    octagon = regular_octagon()
    base = evaluator.ell_inv2_B(octagon)
    flipped = evaluator.ell_inv2_B(rescale(octagon, -1))
    assert flipped.value == pytest.approx(base.value)
    assert flipped.witness_key == base.witness_key
    assert all(sc.upper_half for sc in base.witness)
    chart = homology_basis(octagon)
    assert base.witness_classes == tuple(signed_class(class_of(octagon, chart, sc)) for sc in base.witness)


def test_signed_class_normalises_sign():
    assert signed_class(np.array([0.0, -1.0, 2.0])) == (0, 1, -2)
    assert signed_class(np.array([0.0, 1.0, -2.0])) == (0, 1, -2)
    assert signed_class(np.zeros(3)) == (0, 0, 0)


def test_witness_key_stable_near_deformed_point():
    rng = np.random.default_rng(21)
    point = random_deformation_points(regular_octagon(), 1, rng, scale=0.05)[0]
    chart = homology_basis(point)
    key = evaluator.ell_inv2_B(point).witness_key
    for sign in (1.0, -1.0):
        nudge = sign * 1e-7 * np.exp(1j * np.arange(chart.d))
        assert evaluator.ell_inv2_B(deform(point, chart, nudge)).witness_key == key


def test_greedy_certified_against_longer_pool():
    rng = np.random.default_rng(23)
    point = random_deformation_points(slit_tori(0.3), 1, rng, scale=0.05)[0]
    value = evaluator.ell_inv2_B(point)
    chart = homology_basis(point)
    pool = [sc for sc in enumerate_saddles(point, 2.0 * value.cutoffs["enumeration"]) if sc.upper_half]
    _, total = greedy_max_basis(pool, [sc.length ** -2 for sc in pool],
                                lambda sc: class_of(point, chart, sc), chart.d)
    assert total == pytest.approx(value.value, rel=1e-12)


def _random_basis_total(pool, weights, ambient, rank, rng):
    picked, vectors = 0.0, []
    for i in rng.permutation(len(pool)):
        vec = ambient(pool[i])
        if np.linalg.matrix_rank(np.array(vectors + [vec]), tol=1e-8) > len(vectors):
            vectors.append(vec)
            picked += weights[i]
        if len(vectors) == rank:
            return picked
    return None


def test_cover_greedy_beats_random_bases():
    surface = slit_tori(0.001)
    bases = evaluator.cover_bases(surface, COLLAPSE)
    eta = evaluator.eta_sigma(surface, COLLAPSE)
    zeta = evaluator.zeta_sigma(surface, COLLAPSE)
    quotient_rank = homology_basis(surface).d - bases.disk_rank
    quotient_weights = [sc.length ** -2 for sc in bases.quotient_pool]
    disk_weights = [abs(sc.holonomy) ** 2 for sc in bases.disk_pool]
    rng = np.random.default_rng(29)
    for _ in range(200):
        q = _random_basis_total(bases.quotient_pool, quotient_weights, bases.quotient, quotient_rank, rng)
        k = _random_basis_total(bases.disk_pool, disk_weights, bases.full, bases.disk_rank, rng)
        if q is not None:
            assert bases.area * q <= eta.value * (1 + 1e-12)
            if k is not None:
                assert k * q <= zeta.value * (1 + 1e-12)


def test_cover_functionals_homogeneous_under_collapse():
    surface = slit_tori(0.001)
    base = {name: evaluator.evaluate(name, surface, sigma=COLLAPSE).value
            for name in ("rsigma", "eta", "zeta", "exhsigma")}
    assert base["zeta"] > 0
    for lam in (2.0, 1j, 0.3 + 0.4j):
        moved = rescale(surface, lam)
        assert evaluator.R_sigma(moved, COLLAPSE) == pytest.approx(base["rsigma"] * abs(lam), rel=1e-9)
        for name in ("eta", "zeta", "exhsigma"):
            got = evaluator.evaluate(name, moved, sigma=COLLAPSE).value
            assert got == pytest.approx(base[name], rel=1e-9)


def test_log_functionals():
    octagon = regular_octagon()
    assert evaluator.log_area(octagon).value == pytest.approx(math.log(area(octagon)))
    assert evaluator.log_ell2(octagon).value == pytest.approx(math.log(evaluator.ell_inv2_B(octagon).value))


def test_cover_constant():
    assert cover_constant(2, 0) == pytest.approx(1 / 4096)
    assert cover_constant(2, 1) == pytest.approx(1 / (16 * 5 ** 4))


def test_chi():
    c = cover_constant(2, 0)
    assert chi(0.0, c) == 1.0
    assert chi(c / 2, c) == pytest.approx(2.0)
    with pytest.raises(ZetaOutOfDomain):
        chi(c, c)
    props = chi_properties(c)
    assert props["increasing"] and props["log_convex"]


def test_r_sigma_identity():
    surface = slit_tori(0.1)
    expected = 0.5 * min(0.1, shortest_loop(surface))
    assert evaluator.R_sigma(surface, IDENTITY_2) == pytest.approx(expected)
    assert evaluator.R_sigma(surface, IDENTITY_2) == pytest.approx(0.05)


def test_r_sigma_collapse_is_half_loop():
    surface = slit_tori(0.1)
    assert evaluator.R_sigma(surface, COLLAPSE) == pytest.approx(0.5 * shortest_loop(surface))


def test_cover_membership():
    assert evaluator.in_V_sigma(slit_tori(0.3), IDENTITY_2)[0]
    inside, ctx = evaluator.in_V_sigma(slit_tori(0.001), COLLAPSE)
    assert inside
    assert ctx.disk_radius == pytest.approx(ctx.r_sigma / 8)
    assert ctx.disk_centers == (0,)
    assert not evaluator.in_V_sigma(slit_tori(0.4), COLLAPSE)[0]


def test_not_in_cover():
    with pytest.raises(NotInCover):
        evaluator.eta_sigma(slit_tori(0.4), COLLAPSE)


def test_identity_cover_reduces_to_exh():
    octagon = regular_octagon()
    sigma = identity(0, 1)
    eta = evaluator.eta_sigma(octagon, sigma).value
    assert eta == pytest.approx(math.exp(evaluator.exh_m(octagon).value))
    assert evaluator.zeta_sigma(octagon, sigma).value == 0.0
    assert evaluator.exh_sigma(octagon, sigma).value == pytest.approx(math.log(eta + 1.0))


def test_collapsed_slit_zeta():
    surface = slit_tori(0.001)
    zeta = evaluator.zeta_sigma(surface, COLLAPSE)
    assert zeta.components["disk_rank"] == 1.0
    assert zeta.components["disk_factor"] == pytest.approx(1e-6, rel=1e-9)
    assert zeta.value == pytest.approx(zeta.components["disk_factor"] * zeta.components["quotient_factor"])
    assert zeta.value < cover_constant(2, 0)
    eta = evaluator.eta_sigma(surface, COLLAPSE)
    assert len(eta.witness) == homology_basis(surface).d - 1
    exh = evaluator.exh_sigma(surface, COLLAPSE)
    assert exh.components["chi"] > 1.0


def test_zeta_out_of_domain():
    with pytest.raises(ZetaOutOfDomain):
        evaluator.exh_sigma(slit_tori(0.03), COLLAPSE)


def test_chain():
    surface = slit_tori(0.001)
    single = evaluator.exh_chain(surface, [COLLAPSE])
    assert single.value == pytest.approx(evaluator.exh_sigma(surface, COLLAPSE).value)
    with pytest.raises(ChainNotDecreasing):
        evaluator.exh_chain(surface, [COLLAPSE, IDENTITY_2])
    with pytest.raises(ChainNotDecreasing):
        evaluator.exh_chain(surface, [])


def test_size_mismatch():
    with pytest.raises(SizeMismatch):
        evaluator.R_sigma(slit_tori(0.3), identity(0, 3))
    with pytest.raises(SizeMismatch):
        evaluator.R_sigma(square_torus(), full_collapse(0, 2))


def test_evaluate_dispatch():
    surface = square_torus()
    assert evaluator.evaluate("ell2", surface).value == pytest.approx(2.0)
    assert evaluator.evaluate("area", surface).value == pytest.approx(1.0)
    with pytest.raises(BadFlag):
        evaluator.evaluate("systole", surface)
    with pytest.raises(BadFlag):
        evaluator.evaluate("eta", surface)
    with pytest.raises(BadFlag):
        evaluator.evaluate("chain", surface)


def test_cache_hits():
    local = FunctionalEvaluator()
    local.ell_inv2_B(regular_octagon())
    local.ell_inv2_B(regular_octagon())
    assert local.stats["cache_hits"] >= 1


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
