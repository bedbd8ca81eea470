"""
Geodesics for flatstrata
Saddle-connection enumeration by developing polygon wedges, systole,
marked-point distances, shortest closed geodesics and greedy maximum-weight
bases over homology matroids.

Polygons are split into convex cells (non-convex ones by ear clipping).
From every marked corner a wedge of directions is developed across cell
edges; a wedge is split whenever it meets a vertex, so each recorded segment
is proper. Segments passing exactly through an unmarked regular vertex are
not continued through it.
"""

import cmath
import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from flatstrata_errors import BudgetExceeded, ParamOutOfRange, PolygonDegenerates, RankDeficient, SizeMismatch
from run_config import RunConfig
from surface_core import Corner, EdgeRef, Surface, area

TWO_PI = 2.0 * math.pi

_CACHE_LIMIT = 256
_cache_lock = threading.Lock()
_enumeration_cache: "OrderedDict[Tuple[str, float, int], Tuple[float, List[SaddleConnection]]]" = OrderedDict()


@dataclass(frozen=True)
class SaddleConnection:
    """
    Oriented flat segment between marked points with no marked point inside.

    ``crossing_sequence`` lists the polygon edges crossed, in order; ``edge_chain``
    is a homologous edge path (coefficients over edge classes).
    """
    start_mark: int
    end_mark: int
    holonomy: complex
    length: float
    crossing_sequence: Tuple[EdgeRef, ...]
    start_corner: Corner
    end_corner: Corner
    edge_chain: Tuple[int, ...] = field(repr=False)
    cell_corner: Tuple[int, int] = field(repr=False)

    @property
    def angle(self) -> float:
        a = float(np.mod(np.angle(self.holonomy), TWO_PI))
        return 0.0 if a > TWO_PI - 1e-12 else a

    @property
    def key(self) -> Tuple:
        """Combinatorial identity of the oriented segment, stable under small deformations."""
        return (self.start_mark, self.end_mark, self.start_corner, self.end_corner, self.crossing_sequence)

    @property
    def upper_half(self) -> bool:
        """True for exactly one of each pair of opposite segments (holonomy angle in [0, pi))."""
        tol = 1e-12 * max(1.0, self.length)
        return self.holonomy.imag > tol or (abs(self.holonomy.imag) <= tol and self.holonomy.real > 0)

    def sort_key(self) -> Tuple:
        return (self.length, self.angle, self.start_mark, self.end_mark,
                self.crossing_sequence, self.start_corner)


@dataclass
class ShortestLoop:
    value: float
    closed_connection: Optional[SaddleConnection]
    cylinder_circumference: Optional[float]
    cutoff: float
    warning: bool


@dataclass
class _Cell:
    polygon: int
    vertices: Tuple[complex, ...]
    orig_vertex: Tuple[int, ...]
    orig_edge: Tuple[Optional[int], ...]


def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _segment_distance(a: complex, b: complex) -> float:
    """Distance from the origin to segment [a, b]."""
    e = b - a
    denom = abs(e) ** 2
    if denom == 0:
        return abs(a)
    t = min(1.0, max(0.0, -(a * e.conjugate()).real / denom))
    return abs(a + t * e)


def _ray_hit(u: complex, a: complex, b: complex) -> Optional[complex]:
    """Point where the ray from the origin in direction u meets the line through a, b."""
    e = b - a
    den = _cross(u, e)
    if den == 0:
        return None
    s = _cross(a, e) / den
    return s * u if s > 0 else None


# ---------------------------------------------------------------------------
# Convex cells
# ---------------------------------------------------------------------------

def _is_convex(pts: Sequence[complex], tol: float) -> bool:
    n_v = len(pts)
    return all(_cross(pts[j] - pts[j - 1], pts[(j + 1) % n_v] - pts[j]) >= -tol for j in range(n_v))


def _in_closed_triangle(z: complex, a: complex, b: complex, c: complex, tol: float) -> bool:
    return (_cross(b - a, z - a) >= -tol and _cross(c - b, z - b) >= -tol
            and _cross(a - c, z - c) >= -tol)


def convex_pieces(poly: Sequence[complex], tol: float) -> List[Tuple[int, ...]]:
    """
    Split a simple CCW polygon into convex pieces by clipping ears until the rest is convex.

    Returns:
        Vertex-index tuples (CCW) of the pieces
    """
    remaining = list(range(len(poly)))
    pieces: List[Tuple[int, ...]] = []
    while not _is_convex([poly[i] for i in remaining], tol):
        n_r = len(remaining)
        for pos in range(n_r):
            a, b, c = remaining[pos - 1], remaining[pos], remaining[(pos + 1) % n_r]
            if _cross(poly[b] - poly[a], poly[c] - poly[b]) <= tol:
                continue
            if any(_in_closed_triangle(poly[q], poly[a], poly[b], poly[c], tol)
                   for q in remaining if q not in (a, b, c)):
                continue
            pieces.append((a, b, c))
            remaining.pop(pos)
            break
        else:
            raise PolygonDegenerates("ear clipping found no ear")
    pieces.append(tuple(remaining))
    return pieces


def build_cells(surface: Surface) -> Tuple[List[_Cell], Dict[Tuple[int, int], Tuple[int, int]]]:
    """Convex cells of all polygons and the gluing of their edges."""
    tol = surface.eps_geom * max(surface.diameter, 1e-300) ** 2
    cells: List[_Cell] = []
    orig_edge_cell: Dict[EdgeRef, Tuple[int, int]] = {}
    diagonals: Dict[Tuple[int, int, int], Tuple[int, int]] = {}

    for p, poly in enumerate(surface.polygons):
        n_v = len(poly)
        for piece in convex_pieces(poly, tol):
            c = len(cells)
            orig_edges: List[Optional[int]] = []
            for j, a in enumerate(piece):
                b = piece[(j + 1) % len(piece)]
                if b == (a + 1) % n_v:
                    orig_edges.append(a)
                    orig_edge_cell[(p, a)] = (c, j)
                else:
                    orig_edges.append(None)
                    diagonals[(p, a, b)] = (c, j)
            cells.append(_Cell(p, tuple(poly[i] for i in piece), tuple(piece), tuple(orig_edges)))

    partner: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for c, cell in enumerate(cells):
        for j, e in enumerate(cell.orig_edge):
            if e is not None:
                partner[(c, j)] = orig_edge_cell[surface.partner(cell.polygon, e)]
            else:
                a = cell.orig_vertex[j]
                b = cell.orig_vertex[(j + 1) % len(cell.orig_vertex)]
                partner[(c, j)] = diagonals[(cell.polygon, b, a)]
    return cells, partner


# ---------------------------------------------------------------------------
# Enumeration engine
# ---------------------------------------------------------------------------

class SaddleConnectionFinder:
    """
    Saddle-connection search on one surface.

    Results are memoised per (surface fingerprint, cutoff); a query below a
    cached cutoff is answered by filtering.
    """

    def __init__(self, surface: Surface, config: Optional[RunConfig] = None,
                 logger: Optional[logging.Logger] = None):
        self.surface = surface
        self.config = config or RunConfig()
        self.logger = logger or logging.getLogger('FlatStrata.Geodesics')
        self.cells, self.cell_partner = build_cells(surface)
        self.len_tol = surface.eps_geom * max(surface.diameter, 1e-300)
        self.angle_tol = max(surface.eps_geom, 1e-12)

        self.stats = {
            "cells": len(self.cells),
            "nodes_visited": 0,
            "connections_found": 0,
            "enumerations": 0,
            "cache_hits": 0,
        }

    # -- public queries ----------------------------------------------------

    def enumerate(self, max_length: float) -> List[SaddleConnection]:
        """All saddle connections of length <= max_length, sorted by (length, angle, start, end)."""
        if not (max_length > 0 and math.isfinite(max_length)):
            raise ParamOutOfRange(f"max_length must be positive and finite, got {max_length}")
        key = (self.surface.fingerprint, self.surface.eps_geom, int(self.config.node_budget))
        with _cache_lock:
            cached = _enumeration_cache.get(key)
            if cached is not None:
                _enumeration_cache.move_to_end(key)
        if cached is not None and cached[0] >= max_length:
            self.stats["cache_hits"] += 1
            return [sc for sc in cached[1] if sc.length <= max_length + self.len_tol]

        result = self._enumerate(max_length)
        with _cache_lock:
            _enumeration_cache[key] = (max_length, result)
            _enumeration_cache.move_to_end(key)
            while len(_enumeration_cache) > _CACHE_LIMIT:
                _enumeration_cache.popitem(last=False)
        return result

    def initial_cutoff(self) -> float:
        """Shortest polygon edge joining two marked points, else sqrt(area)."""
        best = math.inf
        for p, poly in enumerate(self.surface.polygons):
            for e in range(len(poly)):
                if (self.surface.mark_of_corner(p, e) is not None
                        and self.surface.mark_of_corner(p, e + 1) is not None):
                    best = min(best, abs(self.surface.edge_vector(p, e)))
        return best if math.isfinite(best) else math.sqrt(area(self.surface))

    def systole(self) -> Tuple[float, SaddleConnection]:
        cutoff = self.initial_cutoff()
        while True:
            found = self.enumerate(cutoff)
            if found:
                return found[0].length, found[0]
            cutoff *= 2.0

    def distance_matrix(self) -> np.ndarray:
        """Flat distances between all marked points (Dijkstra over saddle connections)."""
        n_marks = self.surface.num_marks
        if n_marks == 1:
            return np.zeros((1, 1))
        cutoff = self.initial_cutoff()
        off_diag = ~np.eye(n_marks, dtype=bool)
        while True:
            dist = self._dijkstra(self.enumerate(cutoff))
            if np.all(np.isfinite(dist[off_diag])) and dist[off_diag].max() <= cutoff + self.len_tol:
                self.logger.debug(f"Distances certified at cutoff {cutoff:.6g}")
                return dist
            cutoff *= 2.0

    def distance(self, i: int, j: int) -> float:
        n_marks = self.surface.num_marks
        if not (0 <= i < n_marks and 0 <= j < n_marks):
            raise ParamOutOfRange(f"marked-point index out of range: {i}, {j} (surface has {n_marks})")
        if i == j:
            return 0.0
        cutoff = self.initial_cutoff()
        while True:
            dist = self._dijkstra(self.enumerate(cutoff))
            if math.isfinite(dist[i, j]) and dist[i, j] <= cutoff + self.len_tol:
                return float(dist[i, j])
            cutoff *= 2.0

    def shortest_loop(self) -> ShortestLoop:
        """
        Shortest closed geodesic: closed saddle connections and cylinder cores.

        A cylinder of circumference c has a boundary saddle connection no longer
        than c, so tracing beside every connection shorter than the current best
        finds all cores below the cutoff.
        """
        cutoff = self.initial_cutoff()
        while True:
            found = self.enumerate(cutoff)
            closed = [sc for sc in found if sc.start_mark == sc.end_mark]
            closed_best = closed[0] if closed else None
            best = closed_best.length if closed_best else math.inf
            cylinder = self._shortest_cylinder(found, min(best, cutoff))
            value = min(best, cylinder)
            if value <= cutoff + self.len_tol:
                warning = (closed_best is not None and math.isfinite(cylinder)
                           and abs(best - cylinder) <= 0.1 * min(best, cylinder))
                if warning:
                    self.logger.debug(
                        f"Closed connection ({best:.6g}) and cylinder core ({cylinder:.6g}) within 10%"
                    )
                return ShortestLoop(
                    value=value,
                    closed_connection=closed_best,
                    cylinder_circumference=cylinder if math.isfinite(cylinder) else None,
                    cutoff=cutoff,
                    warning=warning,
                )
            cutoff *= 2.0

    # -- search ------------------------------------------------------------

    def _enumerate(self, max_length: float) -> List[SaddleConnection]:
        self.stats["enumerations"] += 1
        budget = int(self.config.node_budget)
        counter = [0]
        raw: Dict[Tuple, SaddleConnection] = {}
        quantum = 1e-7 * max(self.surface.diameter, 1e-300)

        for c, cell in enumerate(self.cells):
            for v in range(len(cell.vertices)):
                mark = self.surface.mark_of_corner(cell.polygon, cell.orig_vertex[v])
                if mark is None:
                    continue
                for sc in self._search_from(c, v, mark, max_length, counter, budget):
                    dedup = (sc.start_mark, sc.start_corner, sc.end_mark,
                             round(sc.holonomy.real / quantum), round(sc.holonomy.imag / quantum))
                    if dedup not in raw:
                        raw[dedup] = sc

        result = sorted(raw.values(), key=SaddleConnection.sort_key)
        self.stats["nodes_visited"] += counter[0]
        self.stats["connections_found"] = len(result)
        self.logger.debug(
            f"Enumerated {len(result)} saddle connections up to {max_length:.6g} "
            f"({counter[0]} nodes, {len(self.cells)} cells)"
        )
        return result

    def _search_from(self, c0: int, v0: int, mark: int, max_length: float,
                     counter: List[int], budget: int) -> List[SaddleConnection]:
        cells = self.cells
        tol = self.angle_tol
        len_tol = self.len_tol
        found: List[SaddleConnection] = []

        cell0 = cells[c0]
        n0 = len(cell0.vertices)
        offset0 = -cell0.vertices[v0]
        d_out = cell0.vertices[(v0 + 1) % n0] - cell0.vertices[v0]
        d_in_rev = cell0.vertices[(v0 - 1) % n0] - cell0.vertices[v0]
        width0 = float(np.mod(np.angle(d_in_rev / d_out), TWO_PI))
        lo0 = d_out / abs(d_out)

        # node: (cell, offset, lo direction, width, lo closed, entry edge, crossings)
        stack = [(c0, offset0, lo0, width0, True, None, ())]
        while stack:
            counter[0] += 1
            if counter[0] > budget:
                raise BudgetExceeded(
                    f"node budget {budget} exhausted at cutoff {max_length:.6g}; lower the cutoff "
                    f"or raise FLATSTRATA_BUDGET"
                )
            c, offset, lo_dir, width, lo_closed, entry, path = stack.pop()
            cell = cells[c]
            n_v = len(cell.vertices)
            pts = [z + offset for z in cell.vertices]

            if entry is None:
                ref = lo_dir * cmath.exp(0.5j * width)
            else:
                centroid = sum(pts) / n_v
                ref = centroid / abs(centroid)
            ref_conj = ref.conjugate()

            def rel(z: complex) -> float:
                return cmath.phase(z * ref_conj)

            w_lo = rel(lo_dir)
            intervals = [[w_lo, w_lo + width, lo_closed]]

            if entry is None:
                candidates = [j for j in range(n_v) if j != v0]
            else:
                candidates = [j for j in range(n_v) if j not in (entry, (entry + 1) % n_v)]
            candidates.sort(key=lambda j: abs(pts[j]))

            for j in candidates:
                a = rel(pts[j])
                hit = False
                for k, (lo, hi, closed) in enumerate(intervals):
                    if abs(a - lo) <= tol:
                        if closed:
                            hit = True
                            intervals[k][2] = False
                        break
                    if lo + tol < a < hi - tol:
                        hit = True
                        intervals[k:k + 1] = [[lo, a, closed], [a, hi, False]]
                        break
                if not hit or abs(pts[j]) > max_length + len_tol:
                    continue
                end_corner = (cell.polygon, cell.orig_vertex[j])
                end_mark = self.surface.mark_of_corner(*end_corner)
                if end_mark is None:
                    continue
                found.append(self._make_connection(mark, end_mark, pts[j], path,
                                                   (cell0.polygon, cell0.orig_vertex[v0]),
                                                   end_corner, (c0, v0)))

            for j in range(n_v):
                if entry is None and j in (v0, (v0 - 1) % n_v):
                    continue
                if j == entry:
                    continue
                pa, pb = pts[j], pts[(j + 1) % n_v]
                a, b = rel(pa), rel(pb)
                if b - a <= tol or _segment_distance(pa, pb) > max_length + len_tol:
                    continue
                for lo, hi, closed in intervals:
                    new_lo, new_hi = max(lo, a), min(hi, b)
                    if new_hi <= new_lo:
                        continue
                    new_closed = closed and lo > a + tol
                    if new_hi - new_lo <= tol and not new_closed:
                        continue
                    u_lo = ref * cmath.exp(1j * new_lo)
                    u_hi = ref * cmath.exp(1j * new_hi)
                    q_lo, q_hi = _ray_hit(u_lo, pa, pb), _ray_hit(u_hi, pa, pb)
                    if q_lo is not None and q_hi is not None and \
                            _segment_distance(q_lo, q_hi) > max_length + len_tol:
                        continue
                    c2, j2 = self.cell_partner[(c, j)]
                    offset2 = pb - cells[c2].vertices[j2]
                    stack.append((c2, offset2, u_lo, new_hi - new_lo, new_closed, j2,
                                  path + ((c, j),)))
        return found

    def _make_connection(self, start_mark: int, end_mark: int, holonomy: complex,
                         path: Tuple[Tuple[int, int], ...], start_corner: Corner,
                         end_corner: Corner, cell_corner: Tuple[int, int]) -> SaddleConnection:
        crossings = tuple(
            (self.cells[c].polygon, self.cells[c].orig_edge[j])
            for c, j in path if self.cells[c].orig_edge[j] is not None
        )
        return SaddleConnection(
            start_mark=start_mark,
            end_mark=end_mark,
            holonomy=complex(holonomy),
            length=abs(holonomy),
            crossing_sequence=crossings,
            start_corner=start_corner,
            end_corner=end_corner,
            edge_chain=self.edge_chain(start_corner, crossings, end_corner),
            cell_corner=cell_corner,
        )

    def edge_chain(self, start_corner: Corner, crossings: Sequence[EdgeRef],
                   end_corner: Corner) -> Tuple[int, ...]:
        """
        Edge path homotopic to a traced segment.

        Inside each polygon walk the boundary forward from the current vertex to
        the start of the exited edge, then take the exited edge whole; it ends at
        the start vertex of the entry edge on the other side.
        """
        surface = self.surface
        chain = [0] * surface.num_edge_classes

        def walk(p: int, a: int, b: int):
            n_v = surface.num_vertices(p)
            e = a
            while e != b:
                idx, sign = surface.edge_index[(p, e)]
                chain[idx] += sign
                e = (e + 1) % n_v

        p, cur = start_corner
        for q, e in crossings:
            walk(q, cur, e)
            idx, sign = surface.edge_index[(q, e)]
            chain[idx] += sign
            p, cur = surface.partner(q, e)
        walk(end_corner[0], cur, end_corner[1])
        return tuple(chain)

    # -- straight-line flow ------------------------------------------------

    def _exit(self, c: int, x: complex, u: complex) -> Tuple[int, float, bool]:
        """Exit edge, travel distance, and whether the exit is through a vertex."""
        verts = self.cells[c].vertices
        n_v = len(verts)
        best: Optional[Tuple[int, float, float]] = None
        for j in range(n_v):
            a = verts[j]
            e = verts[(j + 1) % n_v] - a
            den = _cross(u, e)
            if den <= 1e-15 * abs(e):
                continue
            s = _cross(a - x, e) / den
            t = _cross(a - x, u) / den
            if s <= self.len_tol or t < -1e-12 or t > 1 + 1e-12:
                continue
            if best is None or s < best[1]:
                best = (j, s, t)
        if best is None:
            raise PolygonDegenerates(f"no exit from cell {c}")
        j, s, t = best
        edge_len = abs(verts[(j + 1) % n_v] - verts[j])
        at_vertex = t * edge_len <= self.len_tol or (1 - t) * edge_len <= self.len_tol
        return j, s, at_vertex

    def _cross_edge(self, c: int, j: int, y: complex) -> Tuple[int, complex]:
        c2, j2 = self.cell_partner[(c, j)]
        verts = self.cells[c].vertices
        return c2, y + (self.cells[c2].vertices[j2] - verts[(j + 1) % len(verts)])

    def _walk(self, c: int, x: complex, u: complex, distance: float) -> Tuple[int, complex]:
        travelled = 0.0
        for _ in range(100000):
            j, s, _ = self._exit(c, x, u)
            if travelled + s >= distance:
                return c, x + (distance - travelled) * u
            c, x = self._cross_edge(c, j, x + s * u)
            travelled += s
        raise BudgetExceeded("walk did not terminate")

    def _locate(self, c: int, z: complex) -> Tuple[int, complex]:
        for _ in range(64):
            verts = self.cells[c].vertices
            n_v = len(verts)
            worst, worst_j = 0.0, None
            for j in range(n_v):
                e = verts[(j + 1) % n_v] - verts[j]
                side = _cross(e, z - verts[j]) / abs(e)
                if side < worst:
                    worst, worst_j = side, j
            if worst_j is None:
                return c, z
            c, z = self._cross_edge(c, worst_j, z)
        raise PolygonDegenerates("could not locate point")

    def _closed_orbit_length(self, c: int, x: complex, u: complex, max_length: float) -> Optional[float]:
        """Length after which the straight flow from x returns to x, if at most max_length."""
        start_c, start_x = c, x
        travelled = 0.0
        while travelled <= max_length + self.len_tol:
            j, s, at_vertex = self._exit(c, x, u)
            if c == start_c:
                w = start_x - x
                along = (w * u.conjugate()).real
                if abs(_cross(u, w)) <= 10 * self.len_tol and self.len_tol < along <= s + self.len_tol:
                    total = travelled + along
                    return total if total <= max_length + self.len_tol else None
            if at_vertex:
                return None
            c, x = self._cross_edge(c, j, x + s * u)
            travelled += s
        return None

    def _shortest_cylinder(self, connections: Sequence[SaddleConnection], max_length: float) -> float:
        best = math.inf
        limit = max_length
        eps = 1e-7 * max(self.surface.diameter, 1e-300)
        for sc in connections:
            if sc.length >= min(best, limit) + self.len_tol:
                break
            if sc.angle >= math.pi - 1e-12:
                continue
            u = sc.holonomy / sc.length
            c0, v0 = sc.cell_corner
            mid_c, mid = self._walk(c0, self.cells[c0].vertices[v0], u, 0.5 * sc.length)
            offset = min(eps, 1e-3 * sc.length)
            for side in (1.0, -1.0):
                c, x = self._locate(mid_c, mid + side * 1j * offset * u)
                length = self._closed_orbit_length(c, x, u, min(best, limit))
                if length is not None and length < best:
                    best = length
        return best

    def _dijkstra(self, connections: Sequence[SaddleConnection]) -> np.ndarray:
        n_marks = self.surface.num_marks
        weights: Dict[Tuple[int, int], float] = {}
        for sc in connections:
            if sc.start_mark != sc.end_mark:
                pair = (sc.start_mark, sc.end_mark)
                weights[pair] = min(weights.get(pair, math.inf), sc.length)
        if not weights:
            dist = np.full((n_marks, n_marks), np.inf)
            np.fill_diagonal(dist, 0.0)
            return dist
        rows, cols = zip(*weights.keys())
        graph = csr_matrix((list(weights.values()), (rows, cols)), shape=(n_marks, n_marks))
        return dijkstra(graph, directed=True)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------

def enumerate_saddles(surface: Surface, max_length: float,
                      config: Optional[RunConfig] = None) -> List[SaddleConnection]:
    return SaddleConnectionFinder(surface, config).enumerate(max_length)


def systole(surface: Surface, config: Optional[RunConfig] = None) -> Tuple[float, SaddleConnection]:
    return SaddleConnectionFinder(surface, config).systole()


def distance(surface: Surface, i: int, j: int, config: Optional[RunConfig] = None) -> float:
    return SaddleConnectionFinder(surface, config).distance(i, j)


def distance_matrix(surface: Surface, config: Optional[RunConfig] = None) -> np.ndarray:
    return SaddleConnectionFinder(surface, config).distance_matrix()


def shortest_loop_details(surface: Surface, config: Optional[RunConfig] = None) -> ShortestLoop:
    return SaddleConnectionFinder(surface, config).shortest_loop()


def shortest_loop(surface: Surface, config: Optional[RunConfig] = None) -> float:
    return shortest_loop_details(surface, config).value


def greedy_max_basis(segments: Sequence[SaddleConnection],
                     weights: Sequence[float],
                     ambient: Callable[[SaddleConnection], np.ndarray],
                     target_rank: int,
                     eps_rank: float = 1e-8) -> Tuple[List[SaddleConnection], float]:
    """
    Maximum-weight independent set of rank target_rank.

    Segments are taken in decreasing weight (ties: length, then angle) and kept
    when their class vector is independent of those kept so far.

    Args:
        segments: Candidate pool
        weights: Nonnegative weight per segment
        ambient: Class vector of a segment (full homology or a quotient)
        target_rank: Rank at which to stop
        eps_rank: Pivot threshold of the independence test

    Returns:
        (basis, total weight)

    Raises:
        RankDeficient: the pool spans less than target_rank
        SizeMismatch: segments and weights differ in length
    """
    if len(segments) != len(weights):
        raise SizeMismatch(f"{len(segments)} segments but {len(weights)} weights",
                           invariant="one weight per segment")
    basis: List[SaddleConnection] = []
    total = 0.0
    if target_rank <= 0:
        return basis, total

    order = sorted(range(len(segments)),
                   key=lambda i: (-weights[i], segments[i].length, segments[i].angle))
    span: List[np.ndarray] = []
    for i in order:
        vec = np.asarray(ambient(segments[i]), dtype=float)
        scale = max(1.0, float(np.linalg.norm(vec)))
        residual = vec.copy()
        for _ in range(2):
            for q in span:
                residual -= (q @ residual) * q
        norm = float(np.linalg.norm(residual))
        if norm <= eps_rank * scale:
            continue
        span.append(residual / norm)
        basis.append(segments[i])
        total += float(weights[i])
        if len(basis) == target_rank:
            return basis, total

    raise RankDeficient(f"segment pool spans rank {len(basis)} < {target_rank}")
