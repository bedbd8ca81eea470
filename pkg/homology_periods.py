"""
Homology and Periods for flatstrata
Integral basis of relative homology H_1(C, P; Z) from the polygon cell complex,
the period map, and its local inverse (deforming edge holonomies).

Cells: vertices are vertex classes, edges are glued-edge classes (oriented as
their representative, the smaller (polygon, edge) pair), faces are polygons.
Relative chains drop the marked vertex classes from the boundary map.
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix, eye

from flatstrata_errors import (
    BoundaryNotMarked,
    ClosureViolation,
    FlatStrataError,
    PolygonDegenerates,
    RankMismatch,
)
from surface_core import Surface, _signed_area, topology, with_polygons

logger = logging.getLogger('FlatStrata.Homology')

# Integral structure depends only on the combinatorics; deformations reuse it.
_chart_lock = threading.Lock()
_CHART_CACHE_LIMIT = 128
_chart_cache: "OrderedDict[Tuple, PeriodChart]" = OrderedDict()


# ---------------------------------------------------------------------------
# Smith normal form over the integers
# ---------------------------------------------------------------------------

def _smallest_entry(A: Matrix, s: int) -> Optional[Tuple[int, int]]:
    best = None
    for i in range(s, A.rows):
        for j in range(s, A.cols):
            if A[i, j] != 0 and (best is None or abs(A[i, j]) < abs(A[best])):
                best = (i, j)
    return best


def smith_normal_form(matrix: Matrix) -> Tuple[Matrix, Matrix, Matrix, int]:
    """
    Computes Smith's normal form D of an integer matrix A with L * A * R = D.

    Pivots are chosen as the smallest nonzero entry, ties broken by (row, col),
    so the transforms are deterministic.

    Returns:
        (D, L, R, rank) with L and R unimodular
    """
    A = matrix.copy()
    rows, cols = A.shape
    L, R = eye(rows), eye(cols)
    rank = 0

    for s in range(min(rows, cols)):
        pivot = _smallest_entry(A, s)
        if pivot is None:
            break
        i, j = pivot
        if i != s:
            A.row_swap(s, i)
            L.row_swap(s, i)
        if j != s:
            A.col_swap(s, j)
            R.col_swap(s, j)

        while True:
            for i in range(s + 1, rows):
                if A[i, s] != 0:
                    q = A[i, s] // A[s, s]
                    A[i, :] = A[i, :] - q * A[s, :]
                    L[i, :] = L[i, :] - q * L[s, :]
            for j in range(s + 1, cols):
                if A[s, j] != 0:
                    q = A[s, j] // A[s, s]
                    A[:, j] = A[:, j] - q * A[:, s]
                    R[:, j] = R[:, j] - q * R[:, s]

            # remainders left in the edging: bring the smallest to the pivot
            edge = [(i, s) for i in range(s + 1, rows) if A[i, s] != 0]
            edge += [(s, j) for j in range(s + 1, cols) if A[s, j] != 0]
            if edge:
                i, j = min(edge, key=lambda ij: (abs(A[ij]), ij))
                if j == s:
                    A.row_swap(s, i)
                    L.row_swap(s, i)
                else:
                    A.col_swap(s, j)
                    R.col_swap(s, j)
                continue

            # pivot must divide the remaining block
            bad = next(((i, j) for i in range(s + 1, rows) for j in range(s + 1, cols)
                        if A[i, j] % A[s, s] != 0), None)
            if bad is not None:
                A[s, :] = A[s, :] + A[bad[0], :]
                L[s, :] = L[s, :] + L[bad[0], :]
                continue
            break

        if A[s, s] < 0:
            A[s, :] = -A[s, :]
            L[s, :] = -L[s, :]
        rank += 1

    return A, L, R, rank


# ---------------------------------------------------------------------------
# Chain complex of the glued polygons
# ---------------------------------------------------------------------------

def boundary_matrices(surface: Surface) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integer boundary maps of the cell complex.

    Returns:
        (d1, d2): d1 is (vertex classes x edge classes), d2 is (edge classes x polygons)
    """
    n_e = surface.num_edge_classes
    d1 = np.zeros((surface.num_classes, n_e), dtype=np.int64)
    for idx, (p, e) in enumerate(surface.edge_reps):
        d1[surface.corner_class[(p, (e + 1) % surface.num_vertices(p))], idx] += 1
        d1[surface.corner_class[(p, e)], idx] -= 1

    d2 = np.zeros((n_e, len(surface.polygons)), dtype=np.int64)
    for p, poly in enumerate(surface.polygons):
        for e in range(len(poly)):
            idx, sign = surface.edge_index[(p, e)]
            d2[idx, p] += sign
    return d1, d2


def relative_boundary(surface: Surface) -> np.ndarray:
    d1, _ = boundary_matrices(surface)
    unmarked = [c for c in range(surface.num_classes) if c not in surface.class_mark]
    return d1[unmarked, :]


def edge_holonomies(surface: Surface) -> np.ndarray:
    """Holonomy of every edge class along its representative orientation."""
    return np.array([surface.edge_vector(p, e) for p, e in surface.edge_reps], dtype=complex)


@dataclass(frozen=True)
class PeriodChart:
    """
    Integral basis of H_1(C, P; Z) with the period vector.

    Attributes:
        basis: (edge classes x d) integer matrix, one relative cycle per column
        period_vector: periods of the basis cycles
        edge_class_map: (d x edge classes) integer matrix sending a relative
            cycle (edge-class chain) to its coordinates in the basis
        face_map: (edge classes x polygons) boundary map of the faces
        relative_d1: relative boundary map on edge classes
        edge_holonomy: holonomy of each edge class
    """
    basis: np.ndarray
    period_vector: np.ndarray
    edge_class_map: np.ndarray
    face_map: np.ndarray
    relative_d1: np.ndarray
    edge_holonomy: np.ndarray

    @property
    def d(self) -> int:
        return int(self.basis.shape[1])

    def describe_cycle(self, j: int) -> str:
        terms = []
        for idx, coeff in enumerate(self.basis[:, j]):
            if coeff == 0:
                continue
            sign = "-" if coeff < 0 else "+"
            mag = "" if abs(coeff) == 1 else f"{abs(coeff)}*"
            terms.append(f"{sign} {mag}e{idx}")
        text = " ".join(terms)
        return text[2:] if text.startswith("+ ") else text


def combinatorial_key(surface: Surface) -> Tuple:
    return (
        tuple(len(poly) for poly in surface.polygons),
        surface.gluings,
        tuple(mk.vertex for mk in surface.markings),
        surface.n,
    )


def homology_basis(surface: Surface) -> PeriodChart:
    """
    Compute an integral basis of relative homology and the period vector.

    Raises:
        RankMismatch: rank differs from 2g + n + k - 1, or torsion appears
    """
    key = combinatorial_key(surface)
    with _chart_lock:
        cached = _chart_cache.get(key)
        if cached is not None:
            _chart_cache.move_to_end(key)
    if cached is not None:
        hol = edge_holonomies(surface)
        return replace(cached, period_vector=cached.basis.T.astype(float) @ hol, edge_holonomy=hol)

    chart = _integral_chart(surface)
    with _chart_lock:
        _chart_cache[key] = chart
        _chart_cache.move_to_end(key)
        while len(_chart_cache) > _CHART_CACHE_LIMIT:
            _chart_cache.popitem(last=False)
    return chart


def chart_cache_size() -> int:
    with _chart_lock:
        return len(_chart_cache)


def _integral_chart(surface: Surface) -> PeriodChart:
    d1_rel = relative_boundary(surface)
    _, d2 = boundary_matrices(surface)
    n_e = surface.num_edge_classes

    # Relative cycles: Z = R[:, r:] where U * d1_rel * R = D
    if d1_rel.shape[0] > 0:
        _, _, R, r = smith_normal_form(Matrix(d1_rel.tolist()))
    else:
        R, r = eye(n_e), 0
    R_inv = R.inv()
    Z = R[:, r:]

    # Boundaries in cycle coordinates, then their Smith form
    M = (R_inv * Matrix(d2.tolist()))[r:, :]
    if M.rows == 0:
        raise RankMismatch("no relative cycles")
    D2, L2, _, s = smith_normal_form(M)
    torsion = [D2[i, i] for i in range(s) if D2[i, i] != 1]
    if torsion:
        raise RankMismatch(f"relative homology has torsion {torsion}")

    L2_inv = L2.inv()
    basis = Z * L2_inv[:, s:]
    class_map = (L2 * R_inv[r:, :])[s:, :]

    d = basis.shape[1]
    sig = topology(surface)
    if d != sig.period_dimension:
        raise RankMismatch(f"relative homology rank {d} != 2g+n+k-1 = {sig.period_dimension}")

    basis_np = np.array([[int(x) for x in row] for row in basis.tolist()], dtype=np.int64).reshape(n_e, d)
    class_np = np.array([[int(x) for x in row] for row in class_map.tolist()], dtype=np.int64).reshape(d, n_e)
    hol = edge_holonomies(surface)
    periods = basis_np.T.astype(float) @ hol

    logger.debug(f"Homology basis: d={d}, edge classes={n_e}, rank(d1_rel)={r}, rank(d2)={s}")
    return PeriodChart(
        basis=basis_np,
        period_vector=periods,
        edge_class_map=class_np,
        face_map=d2,
        relative_d1=d1_rel,
        edge_holonomy=hol,
    )


def class_of(surface: Surface, chart: PeriodChart, chain: Any) -> np.ndarray:
    """
    Coordinates of a relative 1-cycle in the chart basis.

    Args:
        surface: Surface the chart belongs to
        chart: PeriodChart from homology_basis
        chain: Edge-class chain (vector over edge classes), or any object
            carrying one as ``edge_chain`` (a traced saddle connection)

    Raises:
        BoundaryNotMarked: the chain has boundary at an unmarked vertex
    """
    vec = np.asarray(getattr(chain, "edge_chain", chain), dtype=float)
    if vec.shape != (surface.num_edge_classes,):
        raise BoundaryNotMarked(f"chain has length {vec.shape}, expected {surface.num_edge_classes}")
    if chart.relative_d1.size and np.max(np.abs(chart.relative_d1 @ vec)) > 1e-9:
        raise BoundaryNotMarked("chain boundary meets an unmarked vertex")
    return chart.edge_class_map @ vec


def chain_period(chart: PeriodChart, chain: Any) -> complex:
    vec = np.asarray(getattr(chain, "edge_chain", chain), dtype=float)
    return complex(chart.edge_holonomy @ vec)


def cocycle_for(chart: PeriodChart, delta: Sequence[complex]) -> np.ndarray:
    """
    Minimum-norm edge-holonomy change with prescribed period change.

    Solves face closure (d2^T h = 0) and basis periods (basis^T h = delta).
    """
    delta = np.asarray(delta, dtype=complex)
    if delta.shape != (chart.d,):
        raise ClosureViolation(f"delta has shape {delta.shape}, expected ({chart.d},)")
    system = np.vstack([chart.face_map.T, chart.basis.T]).astype(complex)
    rhs = np.concatenate([np.zeros(chart.face_map.shape[1], dtype=complex), delta])
    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = np.max(np.abs(system @ solution - rhs)) if rhs.size else 0.0
    if residual > 1e-9 * max(1.0, float(np.max(np.abs(delta), initial=0.0))):
        raise ClosureViolation(f"period change not realisable, residual {residual:.3g}")
    return solution


def deform(surface: Surface, chart: PeriodChart, delta: Sequence[complex]) -> Surface:
    """
    Move a surface in period coordinates.

    Every edge class gets holonomy old + cocycle value; each polygon is rebuilt
    from its new edge vectors starting at its old vertex 0.

    Raises:
        PolygonDegenerates: a rebuilt polygon is not simple or has nonpositive area
        ClosureViolation: rebuilt polygons fail to close
    """
    new_hol = chart.edge_holonomy + cocycle_for(chart, delta)
    scale = max(surface.diameter, 1e-300)

    polygons: List[List[complex]] = []
    for p, poly in enumerate(surface.polygons):
        pts = [poly[0]]
        for e in range(len(poly)):
            idx, sign = surface.edge_index[(p, e)]
            pts.append(pts[-1] + sign * new_hol[idx])
        if abs(pts[-1] - pts[0]) > 1e-9 * scale:
            raise ClosureViolation(f"polygon {p} fails to close by {abs(pts[-1] - pts[0]):.3g}")
        pts = pts[:-1]
        if _signed_area(pts) <= 0:
            raise PolygonDegenerates(f"polygon {p} has nonpositive area after deformation")
        polygons.append(pts)

    try:
        return with_polygons(surface, polygons)
    except FlatStrataError as e:
        raise PolygonDegenerates(f"deformed surface invalid: {e}")
