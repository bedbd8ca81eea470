"""
Surface Core for flatstrata
Marked translation surfaces presented as Euclidean polygons glued by translations.

A surface is read from a JSON record with keys ``polygons`` (lists of [x, y]),
``gluings`` (pairs of [polygon, edge]), ``marked`` (records with ``vertex``,
``order`` and ``free``) and ``n``. Edge e of a polygon runs from vertex e to
vertex e+1. Validation computes vertex classes, cone angles and the genus,
and returns an immutable Surface.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import LinearRing

from flatstrata_errors import (
    AngleNotMultipleOf2Pi,
    NonTranslationGluing,
    SelfIntersectingPolygon,
    SignatureMismatch,
    SurfaceValidationError,
    UnmatchedEdge,
    ZeroScalar,
)

logger = logging.getLogger('FlatStrata.Surface')

Corner = Tuple[int, int]
EdgeRef = Tuple[int, int]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Marking:
    """A marked vertex class, referenced through one of its polygon corners."""
    vertex: Corner
    order: int
    free: bool


@dataclass(frozen=True)
class StratumSignature:
    """Genus, number of free markings and the orders of all marked points."""
    g: int
    n: int
    m: Tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.m) - self.n

    @property
    def eps_n(self) -> int:
        return 0 if self.n == 0 else 1

    @property
    def period_dimension(self) -> int:
        return 2 * self.g + self.n + self.k - 1

    def label(self) -> str:
        return "(" + ",".join(str(x) for x in self.m) + ")"


@dataclass(frozen=True, eq=False)
class Surface:
    """
    Immutable marked translation surface.

    Instances are produced by ``build_surface``/``validate``; the derived
    fields (vertex classes, edge classes, markings per class) are filled there.
    """
    polygons: Tuple[Tuple[complex, ...], ...]
    gluings: Tuple[Tuple[EdgeRef, EdgeRef], ...]
    markings: Tuple[Marking, ...]
    n: int
    eps_geom: float = 1e-9
    eps_angle: float = 1e-7
    partners: Dict[EdgeRef, EdgeRef] = field(default_factory=dict, repr=False)
    corner_class: Dict[Corner, int] = field(default_factory=dict, repr=False)
    class_corners: Tuple[Tuple[Corner, ...], ...] = field(default=(), repr=False)
    cone_multiples: Tuple[int, ...] = field(default=(), repr=False)
    mark_class: Tuple[int, ...] = field(default=(), repr=False)
    class_mark: Dict[int, int] = field(default_factory=dict, repr=False)
    edge_reps: Tuple[EdgeRef, ...] = field(default=(), repr=False)
    edge_index: Dict[EdgeRef, Tuple[int, int]] = field(default_factory=dict, repr=False)

    # -- combinatorics -----------------------------------------------------

    def num_vertices(self, p: int) -> int:
        return len(self.polygons[p])

    def partner(self, p: int, e: int) -> EdgeRef:
        return self.partners[(p, e)]

    def vertex(self, p: int, v: int) -> complex:
        poly = self.polygons[p]
        return poly[v % len(poly)]

    def edge_vector(self, p: int, e: int) -> complex:
        poly = self.polygons[p]
        return poly[(e + 1) % len(poly)] - poly[e % len(poly)]

    def corner_angle(self, p: int, v: int) -> float:
        """Interior angle at corner (p, v), in (0, 2*pi)."""
        poly = self.polygons[p]
        n_v = len(poly)
        d_out = poly[(v + 1) % n_v] - poly[v]
        d_in_rev = poly[(v - 1) % n_v] - poly[v]
        return float(np.mod(np.angle(d_in_rev / d_out), TWO_PI))

    def next_corner_ccw(self, p: int, v: int) -> Corner:
        """The corner met when turning counterclockwise past the incoming edge of (p, v)."""
        n_v = len(self.polygons[p])
        return self.partners[(p, (v - 1) % n_v)]

    @property
    def num_classes(self) -> int:
        return len(self.class_corners)

    @property
    def num_edge_classes(self) -> int:
        return len(self.edge_reps)

    @property
    def num_marks(self) -> int:
        return len(self.markings)

    @property
    def marked_orders(self) -> Tuple[int, ...]:
        return tuple(mk.order for mk in self.markings)

    def mark_of_corner(self, p: int, v: int) -> Optional[int]:
        return self.class_mark.get(self.corner_class[(p, v % len(self.polygons[p]))])

    def cone_angle(self, class_id: int) -> float:
        return sum(self.corner_angle(p, v) for p, v in self.class_corners[class_id])

    # -- geometry ----------------------------------------------------------

    @cached_property
    def diameter(self) -> float:
        """Largest vertex-to-vertex distance within a polygon; the length scale of tolerances."""
        best = 0.0
        for poly in self.polygons:
            pts = np.array(poly, dtype=complex)
            best = max(best, float(np.max(np.abs(pts[:, None] - pts[None, :]))))
        return best

    @property
    def tol(self) -> float:
        return self.eps_geom * max(self.diameter, 1e-300)

    @cached_property
    def fingerprint(self) -> str:
        payload = json.dumps(serialize(self), sort_keys=True, separators=(',', ':'))
        return hashlib.md5(payload.encode('utf-8')).hexdigest()


# ---------------------------------------------------------------------------
# Construction and validation
# ---------------------------------------------------------------------------

def _signed_area(poly: Sequence[complex]) -> float:
    pts = np.asarray(poly, dtype=complex)
    nxt = np.roll(pts, -1)
    return 0.5 * float(np.sum(pts.real * nxt.imag - nxt.real * pts.imag))


def _reorient(poly: Tuple[complex, ...]) -> Tuple[complex, ...]:
    n_v = len(poly)
    return tuple(poly[(-j) % n_v] for j in range(n_v))


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smallest corner becomes the root for deterministic class order
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def build_surface(polygons: Sequence[Sequence[complex]],
                  gluings: Sequence[Tuple[EdgeRef, EdgeRef]],
                  markings: Sequence[Marking],
                  n: int,
                  eps_geom: float = 1e-9,
                  eps_angle: float = 1e-7) -> Surface:
    """
    Validate polygon data and assemble a Surface.

    Clockwise polygons are reoriented; their edge indices are remapped as
    e -> (-e-1) mod N and vertex indices as v -> -v mod N.

    Raises:
        UnmatchedEdge, NonTranslationGluing, SelfIntersectingPolygon,
        AngleNotMultipleOf2Pi, SignatureMismatch
    """
    polys: List[Tuple[complex, ...]] = [tuple(complex(z) for z in poly) for poly in polygons]
    if not polys:
        raise SurfaceValidationError("surface has no polygons")

    reversed_polys = set()
    for p, poly in enumerate(polys):
        if len(poly) < 3:
            raise SelfIntersectingPolygon(f"polygon {p} has fewer than 3 vertices")
        if _signed_area(poly) < 0:
            polys[p] = _reorient(poly)
            reversed_polys.add(p)
            logger.debug(f"Polygon {p} given clockwise; reoriented")

    def remap_edge(ref: EdgeRef) -> EdgeRef:
        p, e = int(ref[0]), int(ref[1])
        if not 0 <= p < len(polys) or not 0 <= e < len(polys[p]):
            raise UnmatchedEdge(f"edge reference {(p, e)} out of range")
        if p in reversed_polys:
            return (p, (-e - 1) % len(polys[p]))
        return (p, e)

    def remap_vertex(ref: Corner) -> Corner:
        p, v = int(ref[0]), int(ref[1])
        if not 0 <= p < len(polys) or not 0 <= v < len(polys[p]):
            raise SignatureMismatch(f"marked vertex {(p, v)} out of range")
        if p in reversed_polys:
            return (p, (-v) % len(polys[p]))
        return (p, v)

    diameter = max(
        float(np.max(np.abs(np.subtract.outer(np.array(poly), np.array(poly))))) for poly in polys
    )
    tol = eps_geom * max(diameter, 1e-300)

    # Simplicity and nondegeneracy
    for p, poly in enumerate(polys):
        for j in range(len(poly)):
            if abs(poly[(j + 1) % len(poly)] - poly[j]) <= tol:
                raise SelfIntersectingPolygon(f"polygon {p} has a zero-length edge {j}")
        ring = LinearRing([(z.real, z.imag) for z in poly])
        if not ring.is_simple:
            raise SelfIntersectingPolygon(f"polygon {p} is not simple")
        if _signed_area(poly) <= tol * tol:
            raise SelfIntersectingPolygon(f"polygon {p} has nonpositive area")

    # Gluing involution
    partners: Dict[EdgeRef, EdgeRef] = {}
    canonical_pairs = []
    for pair in gluings:
        if len(pair) != 2:
            raise UnmatchedEdge(f"gluing {pair!r} is not a pair")
        a, b = remap_edge(tuple(pair[0])), remap_edge(tuple(pair[1]))
        if a == b:
            raise UnmatchedEdge(f"edge {a} glued to itself")
        for ref in (a, b):
            if ref in partners:
                raise UnmatchedEdge(f"edge {ref} glued more than once")
        partners[a], partners[b] = b, a
        canonical_pairs.append((min(a, b), max(a, b)))
    all_edges = [(p, e) for p, poly in enumerate(polys) for e in range(len(poly))]
    missing = [ref for ref in all_edges if ref not in partners]
    if missing:
        raise UnmatchedEdge(f"edges without partner: {missing}")

    # Translation gluing
    for a, b in canonical_pairs:
        va = polys[a[0]][(a[1] + 1) % len(polys[a[0]])] - polys[a[0]][a[1]]
        vb = polys[b[0]][(b[1] + 1) % len(polys[b[0]])] - polys[b[0]][b[1]]
        if abs(va + vb) > tol:
            raise NonTranslationGluing(
                f"edge {a} vector {va:.6g} is not the negative of edge {b} vector {vb:.6g}"
            )

    # Vertex classes: vertex e of p ~ vertex e'+1 of p'
    corners = [(p, v) for p, poly in enumerate(polys) for v in range(len(poly))]
    uf = _UnionFind(corners)
    for (p, e), (q, f) in partners.items():
        uf.union((p, e), (q, (f + 1) % len(polys[q])))

    roots = sorted({uf.find(c) for c in corners})
    root_index = {r: i for i, r in enumerate(roots)}
    corner_class = {c: root_index[uf.find(c)] for c in corners}

    # Corners of each class in counterclockwise order around the cone point
    def next_ccw(c: Corner) -> Corner:
        p, v = c
        return partners[(p, (v - 1) % len(polys[p]))]

    def interior_angle(p: int, v: int) -> float:
        poly = polys[p]
        d_out = poly[(v + 1) % len(poly)] - poly[v]
        d_in_rev = poly[(v - 1) % len(poly)] - poly[v]
        return float(np.mod(np.angle(d_in_rev / d_out), TWO_PI))

    class_corners: List[Tuple[Corner, ...]] = []
    cone_multiples: List[int] = []
    for r in roots:
        cycle = [r]
        nxt = next_ccw(r)
        while nxt != r:
            cycle.append(nxt)
            nxt = next_ccw(nxt)
        members = [c for c in corners if corner_class[c] == root_index[r]]
        if len(cycle) != len(members):
            raise SurfaceValidationError(f"vertex class of {r} is not a single cone")
        total = sum(interior_angle(p, v) for p, v in cycle)
        multiple = int(round(total / TWO_PI))
        if multiple < 1 or abs(total - multiple * TWO_PI) > eps_angle:
            raise AngleNotMultipleOf2Pi(
                f"vertex class of corner {r} has cone angle {total:.10g}, not a positive multiple of 2*pi"
            )
        class_corners.append(tuple(cycle))
        cone_multiples.append(multiple)

    # Euler characteristic and genus
    n_vertices, n_edges, n_faces = len(roots), len(canonical_pairs), len(polys)
    chi = n_vertices - n_edges + n_faces
    if chi % 2 != 0 or chi > 2:
        raise SignatureMismatch(f"Euler characteristic {chi} does not give an integer genus")
    genus = 1 - chi // 2

    # Markings
    marks = [Marking(remap_vertex(tuple(mk.vertex)), int(mk.order), bool(mk.free)) for mk in markings]
    if sum(1 for mk in marks if mk.free) != n:
        raise SignatureMismatch(f"n={n} but {sum(1 for mk in marks if mk.free)} markings are free")
    if any(mk.free for mk in marks[n:]) or not all(mk.free for mk in marks[:n]):
        raise SignatureMismatch("free markings must come first")
    mark_class: List[int] = []
    class_mark: Dict[int, int] = {}
    for i, mk in enumerate(marks):
        cls = corner_class[mk.vertex]
        if cls in class_mark:
            raise SignatureMismatch(f"markings {class_mark[cls]} and {i} name the same point")
        if mk.order < 0 or (i >= n and mk.order == 0):
            raise SignatureMismatch(f"marking {i} has invalid order {mk.order}")
        if cone_multiples[cls] != mk.order + 1:
            raise SignatureMismatch(
                f"marking {i} declares order {mk.order} but cone angle is {cone_multiples[cls]}*2pi"
            )
        mark_class.append(cls)
        class_mark[cls] = i
    for cls, multiple in enumerate(cone_multiples):
        if multiple != 1 and cls not in class_mark:
            raise SignatureMismatch(f"cone point with angle {multiple}*2pi is not marked")
    if sum(mk.order for mk in marks) != 2 * genus - 2:
        raise SignatureMismatch(f"orders sum to {sum(mk.order for mk in marks)}, expected {2 * genus - 2}")

    edge_reps = tuple(sorted(a for a, _ in canonical_pairs))
    edge_index: Dict[EdgeRef, Tuple[int, int]] = {}
    for idx, rep in enumerate(edge_reps):
        edge_index[rep] = (idx, 1)
        edge_index[partners[rep]] = (idx, -1)

    return Surface(
        polygons=tuple(polys),
        gluings=tuple(sorted(canonical_pairs)),
        markings=tuple(marks),
        n=n,
        eps_geom=eps_geom,
        eps_angle=eps_angle,
        partners=partners,
        corner_class=corner_class,
        class_corners=tuple(class_corners),
        cone_multiples=tuple(cone_multiples),
        mark_class=tuple(mark_class),
        class_mark=class_mark,
        edge_reps=edge_reps,
        edge_index=edge_index,
    )


def validate(description: Dict[str, Any], eps_geom: float = 1e-9, eps_angle: float = 1e-7) -> Surface:
    """
    Validate a parsed surface description.

    Args:
        description: Record in the surface file format
        eps_geom: Geometric tolerance (scaled by the surface diameter)
        eps_angle: Cone-angle tolerance in radians

    Returns:
        Valid Surface
    """
    try:
        polygons = [[complex(float(x), float(y)) for x, y in poly] for poly in description["polygons"]]
        gluings = [(tuple(a), tuple(b)) for a, b in description["gluings"]]
        markings = [
            Marking(vertex=tuple(rec["vertex"]), order=int(rec["order"]), free=bool(rec.get("free", False)))
            for rec in description["marked"]
        ]
        n = int(description.get("n", sum(1 for mk in markings if mk.free)))
    except (KeyError, TypeError, ValueError) as e:
        raise SurfaceValidationError(f"malformed surface description: {e}")
    return build_surface(polygons, gluings, markings, n, eps_geom=eps_geom, eps_angle=eps_angle)


def serialize(surface: Surface) -> Dict[str, Any]:
    """Surface file record; ``validate(serialize(S))`` reproduces S."""
    return {
        "polygons": [[[z.real, z.imag] for z in poly] for poly in surface.polygons],
        "gluings": [[list(a), list(b)] for a, b in surface.gluings],
        "marked": [
            {"vertex": list(mk.vertex), "order": mk.order, "free": mk.free} for mk in surface.markings
        ],
        "n": surface.n,
    }


def load_surface(path: str, eps_geom: float = 1e-9, eps_angle: float = 1e-7) -> Surface:
    with open(path, 'r', encoding='utf-8') as f:
        try:
            description = json.load(f)
        except json.JSONDecodeError as e:
            raise SurfaceValidationError(f"{path} is not valid JSON: {e}")
    surface = validate(description, eps_geom=eps_geom, eps_angle=eps_angle)
    logger.debug(f"Loaded surface from {path}: {len(surface.polygons)} polygons")
    return surface


def save_surface(surface: Surface, path: str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, 'w', encoding='utf-8') as f:
        json.dump(serialize(surface), f, sort_keys=True, indent=2)
    return out


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def topology(surface: Surface) -> StratumSignature:
    """Genus from the Euler characteristic, orders from cone angles."""
    chi = surface.num_classes - surface.num_edge_classes + len(surface.polygons)
    g = 1 - chi // 2
    m = tuple(surface.cone_multiples[c] - 1 for c in surface.mark_class)
    signature = StratumSignature(g=g, n=surface.n, m=m)
    if sum(m) != 2 * g - 2:
        raise SignatureMismatch(f"Gauss-Bonnet fails: sum m = {sum(m)}, 2g-2 = {2 * g - 2}")
    return signature


def area(surface: Surface) -> float:
    return float(sum(_signed_area(poly) for poly in surface.polygons))


def rescale(surface: Surface, lam: complex) -> Surface:
    """Multiply the differential by a nonzero complex number."""
    lam = complex(lam)
    if lam == 0:
        raise ZeroScalar("cannot rescale by 0")
    polygons = [[lam * z for z in poly] for poly in surface.polygons]
    return build_surface(polygons, surface.gluings, surface.markings, surface.n,
                         eps_geom=surface.eps_geom, eps_angle=surface.eps_angle)


def with_polygons(surface: Surface, polygons: Sequence[Sequence[complex]]) -> Surface:
    """Same combinatorics and markings, new vertex coordinates."""
    return build_surface(polygons, surface.gluings, surface.markings, surface.n,
                         eps_geom=surface.eps_geom, eps_angle=surface.eps_angle)
