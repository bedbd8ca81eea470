#!/usr/bin/env python3
"""
Tests for surface construction, validation and the builtin families.
Runs under pytest or directly: python test_surface_core.py
"""

import math
import os
import sys
import tempfile

import pytest

from flatstrata_errors import (
    AngleNotMultipleOf2Pi,
    NonTranslationGluing,
    ParamOutOfRange,
    SelfIntersectingPolygon,
    SignatureMismatch,
    SurfaceValidationError,
    UnknownFamily,
    UnmatchedEdge,
    ZeroScalar,
)
from surface_core import (
    Marking,
    area,
    build_surface,
    load_surface,
    rescale,
    save_surface,
    serialize,
    topology,
    validate,
)
from surface_generators import builtin, marked_slit_tori, regular_octagon, slit_tori, square_torus


UNIT_SQUARE = [0j, 1 + 0j, 1 + 1j, 1j]


def test_builtin_strata():
    expected = {
        "square_torus": (1, 1, (0,)),
        "regular_octagon": (2, 0, (2,)),
        "slit_tori": (2, 0, (1, 1)),
        "two_point_torus": (1, 2, (0, 0)),
        "marked_slit_tori": (2, 1, (0, 1, 1)),
    }
    params = {"slit_tori": [0.3], "two_point_torus": [0.25], "marked_slit_tori": [0.2, 0.5]}
    for name, (g, n, m) in expected.items():
        sig = topology(builtin(name, params.get(name, [])))
        assert (sig.g, sig.n, sig.m) == (g, n, m), name
        assert sum(sig.m) == 2 * sig.g - 2


def test_period_dimensions():
    assert topology(square_torus()).period_dimension == 2
    assert topology(regular_octagon()).period_dimension == 4
    assert topology(slit_tori(0.3)).period_dimension == 5
    assert topology(marked_slit_tori(0.2, 0.5)).period_dimension == 6


def test_areas():
    assert area(square_torus()) == pytest.approx(1.0)
    assert area(regular_octagon()) == pytest.approx(2 * (1 + math.sqrt(2)), rel=1e-12)
    assert area(slit_tori(0.3)) == pytest.approx(2.0)
    assert area(builtin("stretched_slit_tori", [0.3, 2.0])) == pytest.approx(3.0)


def test_cone_points_are_marked_corners():
    octagon = regular_octagon()
    assert octagon.num_classes == 1
    assert octagon.cone_multiples == (3,)
    assert octagon.cone_angle(0) == pytest.approx(6 * math.pi)

    slit = slit_tori(0.3)
    assert sorted(slit.cone_multiples[c] for c in slit.mark_class) == [2, 2]


def test_clockwise_polygon_is_reoriented():
    clockwise = [0j, 1j, 1 + 1j, 1 + 0j]
    surface = build_surface([clockwise], [((0, 0), (0, 2)), ((0, 1), (0, 3))],
                            [Marking((0, 0), 0, True)], n=1)
    assert area(surface) == pytest.approx(1.0)
    assert topology(surface).g == 1


def test_non_translation_gluing():
    with pytest.raises(NonTranslationGluing):
        build_surface([UNIT_SQUARE], [((0, 0), (0, 1)), ((0, 2), (0, 3))],
                      [Marking((0, 0), 0, True)], n=1)


def test_unmatched_edge():
    with pytest.raises(UnmatchedEdge):
        build_surface([UNIT_SQUARE], [((0, 0), (0, 2))], [Marking((0, 0), 0, True)], n=1)
    with pytest.raises(UnmatchedEdge):
        build_surface([UNIT_SQUARE], [((0, 0), (0, 2)), ((0, 1), (0, 1))],
                      [Marking((0, 0), 0, True)], n=1)


def test_self_intersecting_polygon():
    bowtie = [0j, 1 + 1j, 1 + 0j, 1j]
    with pytest.raises(SelfIntersectingPolygon):
        build_surface([bowtie], [((0, 0), (0, 2)), ((0, 1), (0, 3))], [Marking((0, 0), 0, True)], n=1)


def test_signature_mismatch():
    octagon = regular_octagon()
    with pytest.raises(SignatureMismatch):
        build_surface(octagon.polygons, octagon.gluings, [Marking((0, 0), 1, False)], n=0)
    with pytest.raises(SignatureMismatch):
        build_surface(octagon.polygons, octagon.gluings, [], n=0)
    with pytest.raises(SignatureMismatch):
        build_surface([UNIT_SQUARE], [((0, 0), (0, 2)), ((0, 1), (0, 3))],
                      [Marking((0, 0), 0, True)], n=0)


def test_rescale():
    octagon = regular_octagon()
    for lam in (2.0, 1j, 0.3 + 0.4j):
        moved = rescale(octagon, lam)
        assert area(moved) == pytest.approx(area(octagon) * abs(lam) ** 2, rel=1e-12)
        assert topology(moved) == topology(octagon)
    with pytest.raises(ZeroScalar):
        rescale(octagon, 0)


def test_serialize_round_trip():
    surface = slit_tori(0.3)
    again = validate(serialize(surface))
    assert again.fingerprint == surface.fingerprint
    assert topology(again) == topology(surface)

    with tempfile.TemporaryDirectory() as tmp:
        path = save_surface(surface, os.path.join(tmp, "slit.tsurf"))
        loaded = load_surface(str(path))
        assert loaded.fingerprint == surface.fingerprint


def test_malformed_description():
    with pytest.raises(SurfaceValidationError):
        validate({"polygons": [[[0, 0], [1, 0]]]})


def test_builtin_errors():
    with pytest.raises(UnknownFamily):
        builtin("klein_bottle")
    with pytest.raises(ParamOutOfRange):
        slit_tori(1.5)
    with pytest.raises(ParamOutOfRange):
        marked_slit_tori(0.6, 0.5)


def test_fingerprint_changes_with_geometry():
    assert slit_tori(0.3).fingerprint != slit_tori(0.31).fingerprint
    assert slit_tori(0.3).fingerprint == slit_tori(0.3).fingerprint


def _hexagon_torus(bump: float):
    corners = [complex(math.cos(math.pi * k / 3), math.sin(math.pi * k / 3)) for k in range(6)]
    corners[1] *= 1 + bump
    gluings = [((0, 0), (0, 3)), ((0, 1), (0, 4)), ((0, 2), (0, 5))]
    markings = [Marking((0, 0), 0, True), Marking((0, 1), 0, True)]
    return corners, gluings, markings


def test_cone_angle_off_multiple_of_two_pi():
    # a bump below eps_geom keeps the gluing a translation but tilts both cone angles
    corners, gluings, markings = _hexagon_torus(5e-10)
    with pytest.raises(AngleNotMultipleOf2Pi):
        build_surface([corners], gluings, markings, n=2, eps_angle=1e-12)
    surface = build_surface([corners], gluings, markings, n=2)
    assert topology(surface).g == 1


def test_topology_ignores_polygon_labels():
    for surface in (slit_tori(0.3), marked_slit_tori(0.2, 0.5)):
        count = len(surface.polygons)
        relabel = {p: count - 1 - p for p in range(count)}
        polygons = [surface.polygons[relabel[p]] for p in range(count)]
        gluings = [((relabel[a[0]], a[1]), (relabel[b[0]], b[1])) for a, b in surface.gluings]
        markings = [Marking((relabel[mk.vertex[0]], mk.vertex[1]), mk.order, mk.free)
                    for mk in surface.markings]
        moved = build_surface(polygons, gluings, markings, n=surface.n)
        assert topology(moved) == topology(surface)
        assert area(moved) == pytest.approx(area(surface))


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
