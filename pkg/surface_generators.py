"""
Builtin surface families used by tests, sweeps and the ``gen`` command.
"""

import cmath
import math
from typing import Callable, Dict, List, Sequence

from flatstrata_errors import ParamOutOfRange, UnknownFamily
from surface_core import Marking, Surface, build_surface


def rect_torus(w: float = 1.0, h: float = 1.0) -> Surface:
    """Rectangle w x h with opposite sides glued, its vertex marked (n=1, m=(0))."""
    if not (w > 0 and h > 0):
        raise ParamOutOfRange(f"rect_torus needs w, h > 0, got {w}, {h}")
    poly = [0j, complex(w, 0), complex(w, h), complex(0, h)]
    gluings = [((0, 0), (0, 2)), ((0, 1), (0, 3))]
    return build_surface([poly], gluings, [Marking((0, 0), 0, True)], n=1)


def square_torus() -> Surface:
    return rect_torus(1.0, 1.0)


def regular_octagon(s: float = 1.0) -> Surface:
    """Regular octagon of side s, opposite sides glued: genus 2, stratum (2)."""
    if not s > 0:
        raise ParamOutOfRange(f"regular_octagon needs s > 0, got {s}")
    poly: List[complex] = [0j]
    for j in range(7):
        poly.append(poly[-1] + s * cmath.exp(1j * math.pi * j / 4))
    gluings = [((0, j), (0, j + 4)) for j in range(4)]
    return build_surface([poly], gluings, [Marking((0, 0), 2, False)], n=0)


def _slit_hexagon(t: float, height: float) -> List[complex]:
    return [0j, complex(t, 0), complex(1, 0), complex(1, height), complex(t, height), complex(0, height)]


def stretched_slit_tori(t: float, h: float = 1.0) -> Surface:
    """
    Unit torus A and 1 x h torus B glued crosswise along a horizontal slit of length t.

    Both tori are hexagons (0,0),(t,0),(1,0),(1,H),(t,H),(0,H). Inside each torus
    e1~e3 and e2~e5; the slit edges are exchanged, A.e0~B.e4 and B.e0~A.e4.
    The two cone points have angle 4*pi each: stratum (1,1), area 1+h.
    """
    if not 0 < t < 1:
        raise ParamOutOfRange(f"slit length t must lie in (0, 1), got {t}")
    if not h > 0:
        raise ParamOutOfRange(f"height h must be positive, got {h}")
    polys = [_slit_hexagon(t, 1.0), _slit_hexagon(t, h)]
    gluings = [
        ((0, 1), (0, 3)), ((0, 2), (0, 5)),
        ((1, 1), (1, 3)), ((1, 2), (1, 5)),
        ((0, 0), (1, 4)), ((1, 0), (0, 4)),
    ]
    markings = [Marking((0, 0), 1, False), Marking((0, 1), 1, False)]
    return build_surface(polys, gluings, markings, n=0)


def slit_tori(t: float) -> Surface:
    """Two unit tori glued along a slit of length t (genus 2, stratum (1,1))."""
    return stretched_slit_tori(t, 1.0)


def two_point_torus(x: float = 0.25) -> Surface:
    """Unit square torus with free marked points at (0,0) and (x,0)."""
    if not 0 < x < 1:
        raise ParamOutOfRange(f"two_point_torus needs 0 < x < 1, got {x}")
    poly = _slit_hexagon(x, 1.0)
    gluings = [((0, 0), (0, 4)), ((0, 1), (0, 3)), ((0, 2), (0, 5))]
    markings = [Marking((0, 0), 0, True), Marking((0, 1), 0, True)]
    return build_surface([poly], gluings, markings, n=2)


def marked_slit_tori(t: float, x: float = 0.5) -> Surface:
    """
    slit_tori(t) with one extra free marked point at (x, 0) of torus A.

    Marks: 0 the free point, 1 and 2 the two zeros (n=1, m=(0,1,1)).
    """
    if not 0 < t < x < 1:
        raise ParamOutOfRange(f"marked_slit_tori needs 0 < t < x < 1, got t={t}, x={x}")
    torus_a = [0j, complex(t, 0), complex(x, 0), complex(1, 0),
               complex(1, 1), complex(x, 1), complex(t, 1), complex(0, 1)]
    torus_b = _slit_hexagon(t, 1.0)
    gluings = [
        ((0, 1), (0, 5)), ((0, 2), (0, 4)), ((0, 3), (0, 7)),
        ((1, 1), (1, 3)), ((1, 2), (1, 5)),
        ((0, 0), (1, 4)), ((1, 0), (0, 6)),
    ]
    markings = [Marking((0, 2), 0, True), Marking((0, 0), 1, False), Marking((0, 1), 1, False)]
    return build_surface([torus_a, torus_b], gluings, markings, n=1)


FAMILIES: Dict[str, Callable[..., Surface]] = {
    "square_torus": square_torus,
    "rect_torus": rect_torus,
    "regular_octagon": regular_octagon,
    "octagon": regular_octagon,
    "slit_tori": slit_tori,
    "stretched_slit_tori": stretched_slit_tori,
    "two_point_torus": two_point_torus,
    "marked_slit_tori": marked_slit_tori,
}


def builtin(name: str, params: Sequence[float] = ()) -> Surface:
    """
    Build a surface from a builtin family.

    Args:
        name: Family name (see FAMILIES)
        params: Positional family parameters

    Returns:
        Valid Surface
    """
    if name not in FAMILIES:
        raise UnknownFamily(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    try:
        return FAMILIES[name](*[float(p) for p in params])
    except TypeError as e:
        raise ParamOutOfRange(f"bad parameters for {name}: {e}")


def genus_two_builtins() -> Dict[str, Surface]:
    return {
        "regular_octagon": regular_octagon(),
        "slit_tori(0.3)": slit_tori(0.3),
        "stretched_slit_tori(0.3,2)": stretched_slit_tori(0.3, 2.0),
    }
