"""
Functionals for flatstrata
Real-valued functions on marked translation surfaces: area, the inverse-square
systolic sum over bases of saddle connections, the exhaustion exh_m, the
relative injectivity radius R_sigma with its clashing disks, and the cover
functions eta_sigma, zeta_sigma, exh_sigma and their sums over chains.

Every basis sum is a greedy maximum over a matroid of saddle-connection classes.
Pools are enumerated with a doubling cutoff; the greedy runs in increasing
length order, so once it reaches the target rank no longer connection can
enter the optimum and the cutoff is certified.
"""

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from flatstrata_errors import (
    BadFlag,
    ChainNotDecreasing,
    ChainTooDeep,
    NotInCover,
    RankDeficient,
    SizeMismatch,
    ZetaOutOfDomain,
)
from geodesics import SaddleConnection, SaddleConnectionFinder, greedy_max_basis
from homology_periods import class_of, homology_basis
from run_config import RunConfig
from strata_covers import Surjection, is_strictly_decreasing, stratification_depth
from surface_core import Surface, area, topology

FUNCTIONAL_NAMES = ("area", "ell2", "exhm", "rsigma", "eta", "zeta", "exhsigma", "chain",
                    "log_ell2", "log_area")
SIGMA_FUNCTIONALS = ("rsigma", "eta", "zeta", "exhsigma")

MAX_DOUBLINGS = 40
_CACHE_LIMIT = 512


@dataclass
class FunctionalValue:
    """
    Result of one functional evaluation.

    ``weights`` holds the weight of each witness segment in the same order;
    ``cutoffs`` records the enumeration cutoffs that certified the value.
    ``witness_classes`` are the witness homology classes up to sign; the value
    of a basis sum depends only on them.
    """
    name: str
    value: float
    witness: Tuple[SaddleConnection, ...] = ()
    weights: Tuple[float, ...] = ()
    components: Dict[str, float] = field(default_factory=dict)
    cutoffs: Dict[str, float] = field(default_factory=dict)
    witness_classes: Tuple[Tuple, ...] = ()

    @property
    def witness_key(self) -> Tuple:
        if self.witness_classes:
            return tuple(sorted(self.witness_classes))
        return tuple(sorted(sc.key for sc in self.witness))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "components": dict(self.components),
            "cutoffs": dict(self.cutoffs),
            "witness": [
                {"start": sc.start_mark, "end": sc.end_mark, "holonomy": sc.holonomy,
                 "length": sc.length, "weight": w}
                for sc, w in zip(self.witness, self.weights)
            ],
        }


@dataclass
class CoverContext:
    """
    Clashing disks of a surjection on one surface.

    ``disk_centers[j-1]`` is the smallest mark index i with sigma(i+1) = j
    (marks are 0-based, surjection images 1-based).
    """
    sigma: Surjection
    disk_centers: Tuple[int, ...]
    disk_radius: float
    c_const: float
    r_sigma: float
    shortest_loop: float
    distances: np.ndarray = field(repr=False)
    in_cover: bool = False

    def center_of(self, mark: int) -> int:
        return self.disk_centers[self.sigma.images[mark] - 1]


@dataclass
class _CoverBases:
    context: CoverContext
    area: float
    quotient_basis: List[SaddleConnection]
    quotient_sum: float
    disk_basis: List[SaddleConnection]
    disk_sum: float
    disk_rank: int
    cutoffs: Dict[str, float]
    quotient_classes: Tuple[Tuple[int, ...], ...] = ()
    disk_classes: Tuple[Tuple[int, ...], ...] = ()
    quotient_pool: List[SaddleConnection] = field(default_factory=list, repr=False)
    disk_pool: List[SaddleConnection] = field(default_factory=list, repr=False)
    quotient: Optional[Callable[[SaddleConnection], np.ndarray]] = field(default=None, repr=False)
    full: Optional[Callable[[SaddleConnection], np.ndarray]] = field(default=None, repr=False)


def cover_constant(g: int, n: int) -> float:
    """c = 1/(16(2g+n)^4)."""
    return float(Fraction(1, 16 * (2 * g + n) ** 4))


def chi(x: float, c: float) -> float:
    """chi(x) = c/(c - x) on [0, c)."""
    if x >= c:
        raise ZetaOutOfDomain(f"zeta = {x:.6g} >= c = {c:.6g}")
    return c / (c - x)


def chi_properties(c: float, xs: Optional[Sequence[float]] = None) -> Dict[str, Any]:
    """Check chi(0) = 1, chi increasing and log chi convex on sample points of [0, c)."""
    if xs is None:
        xs = np.linspace(0.0, 0.99 * c, 64)
    xs = np.sort(np.asarray(xs, dtype=float))
    values = np.array([chi(x, c) for x in xs])
    logs = np.log(values)
    second = np.diff(logs, 2) if len(xs) > 2 else np.zeros(0)
    return {
        "chi_at_zero": chi(0.0, c),
        "chi_at_half": chi(0.5 * c, c),
        "increasing": bool(np.all(np.diff(values) > 0)),
        "log_convex": bool(np.all(second > -1e-12)),
    }


def signed_class(vector: np.ndarray) -> Tuple[int, ...]:
    """Integer homology class normalised up to sign (first nonzero entry positive)."""
    coords = tuple(int(round(float(x))) for x in np.asarray(vector, dtype=float))
    for x in coords:
        if x:
            return coords if x > 0 else tuple(-y for y in coords)
    return coords


def _orthonormal_span(vectors: Sequence[np.ndarray], dim: int, eps_rank: float) -> np.ndarray:
    if not vectors:
        return np.zeros((dim, 0))
    stacked = np.vstack([np.asarray(v, dtype=float) for v in vectors])
    _, s, vt = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(s > eps_rank * max(1.0, float(s[0]))))
    return vt[:rank].T


class FunctionalEvaluator:
    """
    Evaluates functionals on surfaces.

    Holds the run configuration, a bounded cache of results keyed by surface
    fingerprint, and evaluation statistics.
    """

    def __init__(self, config: Optional[RunConfig] = None, logger: Optional[logging.Logger] = None):
        self.config = config or RunConfig()
        self.logger = logger or logging.getLogger('FlatStrata.Functionals')
        self._lock = threading.Lock()
        self._cache: "OrderedDict[Tuple, Any]" = OrderedDict()
        self.stats = {
            "evaluations": 0,
            "cache_hits": 0,
            "cutoff_doublings": 0,
        }

    # -- plumbing ----------------------------------------------------------

    def _cached(self, key: Tuple, compute: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                self.stats["cache_hits"] += 1
                return self._cache[key]
        result = compute()
        with self._lock:
            self.stats["evaluations"] += 1
            self._cache[key] = result
            while len(self._cache) > _CACHE_LIMIT:
                self._cache.popitem(last=False)
        return result

    def _finder(self, surface: Surface) -> SaddleConnectionFinder:
        return SaddleConnectionFinder(surface, self.config)

    def _check_sigma(self, surface: Surface, sigma: Surjection):
        if sigma.n != surface.n or sigma.domain_size != surface.num_marks:
            raise SizeMismatch(
                f"surjection on {sigma.domain_size} points (n={sigma.n}) but surface has "
                f"{surface.num_marks} marks (n={surface.n})"
            )

    def _adaptive_greedy(self, finder: SaddleConnectionFinder,
                         ambient: Callable[[SaddleConnection], np.ndarray],
                         target_rank: int,
                         keep: Optional[Callable[[SaddleConnection], bool]] = None
                         ) -> Tuple[List[SaddleConnection], float, float, List[SaddleConnection]]:
        """
        Greedy max of sum l^-2, doubling the enumeration cutoff until the rank is reached.

        Only one segment of each opposite pair enters the pool; both carry the
        same class up to sign and the same length.
        """
        cutoff = finder.initial_cutoff()
        for _ in range(MAX_DOUBLINGS):
            pool = [sc for sc in finder.enumerate(cutoff) if sc.upper_half]
            if keep is not None:
                pool = [sc for sc in pool if keep(sc)]
            try:
                basis, total = greedy_max_basis(pool, [sc.length ** -2 for sc in pool], ambient,
                                                target_rank, self.config.eps_rank)
                return basis, total, cutoff, pool
            except RankDeficient:
                self.stats["cutoff_doublings"] += 1
                cutoff *= 2.0
        raise RankDeficient(f"rank {target_rank} not reached below cutoff {cutoff:.6g}")

    # -- systolic functionals ----------------------------------------------

    def area_value(self, surface: Surface) -> FunctionalValue:
        a = area(surface)
        return FunctionalValue("area", a, components={"area": a})

    def ell_inv2_B(self, surface: Surface) -> FunctionalValue:
        """Sum of l^-2 over a greedy maximal basis of H_1(C, P; R)."""
        def compute() -> FunctionalValue:
            chart = homology_basis(surface)
            finder = self._finder(surface)
            basis, total, cutoff, _ = self._adaptive_greedy(
                finder, lambda sc: class_of(surface, chart, sc), chart.d
            )
            self.logger.debug(f"ell^-2 basis of rank {chart.d} certified at cutoff {cutoff:.6g}")
            return FunctionalValue(
                name="ell2",
                value=total,
                witness=tuple(basis),
                weights=tuple(sc.length ** -2 for sc in basis),
                components={"ell_inv2": total},
                cutoffs={"enumeration": cutoff},
                witness_classes=tuple(signed_class(class_of(surface, chart, sc)) for sc in basis),
            )

        return self._cached(("ell2", surface.fingerprint), compute)

    def exh_m(self, surface: Surface) -> FunctionalValue:
        a = area(surface)
        ell = self.ell_inv2_B(surface)
        return FunctionalValue(
            name="exhm",
            value=math.log(a * ell.value),
            witness=ell.witness,
            weights=ell.weights,
            components={"area": a, "ell_inv2": ell.value, "Exh": a * ell.value},
            cutoffs=dict(ell.cutoffs),
            witness_classes=ell.witness_classes,
        )

    def log_ell2(self, surface: Surface) -> FunctionalValue:
        ell = self.ell_inv2_B(surface)
        return FunctionalValue("log_ell2", math.log(ell.value), ell.witness, ell.weights,
                               {"ell_inv2": ell.value}, dict(ell.cutoffs), ell.witness_classes)

    def log_area(self, surface: Surface) -> FunctionalValue:
        a = area(surface)
        return FunctionalValue("log_area", math.log(a), components={"area": a})

    # -- covers ------------------------------------------------------------

    def cover_context(self, surface: Surface, sigma: Surjection) -> CoverContext:
        """R_sigma, the clashing disks and V_sigma membership."""
        self._check_sigma(surface, sigma)

        def compute() -> CoverContext:
            sig = topology(surface)
            finder = self._finder(surface)
            dist = finder.distance_matrix()
            loop = finder.shortest_loop().value
            marks = range(surface.num_marks)
            separated = [float(dist[i, k]) for i in marks for k in marks
                         if sigma.images[i] != sigma.images[k]]
            r_sigma = 0.5 * min(separated + [loop])
            radius = r_sigma / (2 * (2 * sig.g + sig.n))
            centers = tuple(sigma.images.index(j) for j in range(1, sigma.codomain_size + 1))
            inside = r_sigma > 0 and all(
                dist[i, centers[sigma.images[i] - 1]] < radius for i in marks
            )
            self.logger.debug(
                f"sigma={sigma.label()}: R={r_sigma:.6g}, disk radius={radius:.6g}, in V: {inside}"
            )
            return CoverContext(
                sigma=sigma,
                disk_centers=centers,
                disk_radius=radius,
                c_const=cover_constant(sig.g, sig.n),
                r_sigma=r_sigma,
                shortest_loop=loop,
                distances=dist,
                in_cover=bool(inside),
            )

        return self._cached(("cover", surface.fingerprint, sigma.images), compute)

    def R_sigma(self, surface: Surface, sigma: Surjection) -> float:
        return self.cover_context(surface, sigma).r_sigma

    def in_V_sigma(self, surface: Surface, sigma: Surjection) -> Tuple[bool, CoverContext]:
        ctx = self.cover_context(surface, sigma)
        return ctx.in_cover, ctx

    def cover_bases(self, surface: Surface, sigma: Surjection) -> _CoverBases:
        """
        In-disk and quotient greedy bases on V_sigma, with the pools they were
        chosen from.

        Raises:
            NotInCover: the surface is outside V_sigma
        """
        ctx = self.cover_context(surface, sigma)
        if not ctx.in_cover:
            raise NotInCover(f"surface is not in V_sigma for sigma={sigma.label()}")

        def compute() -> _CoverBases:
            chart = homology_basis(surface)
            finder = self._finder(surface)
            diameter = 2.0 * ctx.disk_radius
            images = sigma.images

            def full(sc: SaddleConnection) -> np.ndarray:
                return class_of(surface, chart, sc)

            # on V_sigma a segment lies in the disk union iff it joins two points of
            # one collision class and is no longer than the disk diameter
            def in_disk(sc: SaddleConnection) -> bool:
                return (sc.start_mark != sc.end_mark
                        and images[sc.start_mark] == images[sc.end_mark]
                        and sc.length <= diameter + finder.len_tol)

            disk_cutoff = 2.0 * diameter
            disk_pool = [sc for sc in finder.enumerate(disk_cutoff) if sc.upper_half and in_disk(sc)]
            span = _orthonormal_span([full(sc) for sc in disk_pool], chart.d, self.config.eps_rank)
            disk_rank = span.shape[1]

            def quotient(sc: SaddleConnection) -> np.ndarray:
                v = full(sc)
                return v - span @ (span.T @ v)

            quotient_basis, quotient_sum, cutoff, quotient_pool = self._adaptive_greedy(
                finder, quotient, chart.d - disk_rank, keep=lambda sc: not in_disk(sc)
            )
            if disk_rank:
                disk_basis, disk_sum = greedy_max_basis(
                    disk_pool, [abs(sc.holonomy) ** 2 for sc in disk_pool], full,
                    disk_rank, self.config.eps_rank
                )
            else:
                disk_basis, disk_sum = [], 0.0
            self.logger.debug(
                f"sigma={sigma.label()}: disk rank {disk_rank}, quotient rank {chart.d - disk_rank}"
            )
            return _CoverBases(
                context=ctx,
                area=area(surface),
                quotient_basis=quotient_basis,
                quotient_sum=quotient_sum,
                disk_basis=disk_basis,
                disk_sum=disk_sum,
                disk_rank=disk_rank,
                cutoffs={"enumeration": cutoff, "disk": disk_cutoff},
                quotient_classes=tuple(signed_class(full(sc)) for sc in quotient_basis),
                disk_classes=tuple(signed_class(full(sc)) for sc in disk_basis),
                quotient_pool=quotient_pool,
                disk_pool=disk_pool,
                quotient=quotient,
                full=full,
            )

        return self._cached(("bases", surface.fingerprint, sigma.images), compute)

    def eta_sigma(self, surface: Surface, sigma: Surjection) -> FunctionalValue:
        """Area times the greedy max of sum l^-2 over bases of the quotient by in-disk classes."""
        bases = self.cover_bases(surface, sigma)
        return FunctionalValue(
            name="eta",
            value=bases.area * bases.quotient_sum,
            witness=tuple(bases.quotient_basis),
            weights=tuple(sc.length ** -2 for sc in bases.quotient_basis),
            components={"area": bases.area, "ell_inv2_quotient": bases.quotient_sum,
                        "disk_rank": float(bases.disk_rank)},
            cutoffs=dict(bases.cutoffs),
            witness_classes=bases.quotient_classes,
        )

    def zeta_sigma(self, surface: Surface, sigma: Surjection) -> FunctionalValue:
        """(max sum |hol|^2 over in-disk bases) times (max sum l^-2 over quotient bases)."""
        bases = self.cover_bases(surface, sigma)
        value = bases.disk_sum * bases.quotient_sum if bases.disk_rank else 0.0
        return FunctionalValue(
            name="zeta",
            value=value,
            witness=tuple(bases.disk_basis) + tuple(bases.quotient_basis),
            weights=tuple(abs(sc.holonomy) ** 2 for sc in bases.disk_basis)
            + tuple(sc.length ** -2 for sc in bases.quotient_basis),
            components={"disk_factor": bases.disk_sum, "quotient_factor": bases.quotient_sum,
                        "disk_rank": float(bases.disk_rank)},
            cutoffs=dict(bases.cutoffs),
            witness_classes=tuple(("disk",) + c for c in bases.disk_classes)
            + tuple(("quotient",) + c for c in bases.quotient_classes),
        )

    def exh_sigma(self, surface: Surface, sigma: Surjection) -> FunctionalValue:
        """log(eta + chi(zeta)) on U_sigma."""
        eta = self.eta_sigma(surface, sigma)
        zeta = self.zeta_sigma(surface, sigma)
        c = self.cover_bases(surface, sigma).context.c_const
        if zeta.value >= c:
            raise ZetaOutOfDomain(f"zeta_sigma = {zeta.value:.6g} >= c = {c:.6g} for sigma={sigma.label()}")
        chi_value = chi(zeta.value, c)
        return FunctionalValue(
            name="exhsigma",
            value=math.log(eta.value + chi_value),
            witness=zeta.witness,
            weights=zeta.weights,
            components={"eta": eta.value, "zeta": zeta.value, "chi": chi_value, "c": c},
            cutoffs=dict(eta.cutoffs),
            witness_classes=zeta.witness_classes,
        )

    def exh_chain(self, surface: Surface, chain: Sequence[Surjection]) -> FunctionalValue:
        """Sum of exh_sigma over a strictly decreasing chain."""
        if not chain:
            raise ChainNotDecreasing("empty chain")
        for sigma in chain:
            self._check_sigma(surface, sigma)
        if not is_strictly_decreasing(chain):
            raise ChainNotDecreasing(" > ".join(s.label() for s in chain))
        sig = topology(surface)
        depth = stratification_depth(sig.g, sig.n)
        if len(chain) - 1 > depth:
            raise ChainTooDeep(f"chain of length {len(chain)} exceeds depth {depth}")

        parts = [self.exh_sigma(surface, sigma) for sigma in chain]
        return FunctionalValue(
            name="chain",
            value=float(sum(p.value for p in parts)),
            witness=tuple(sc for p in parts for sc in p.witness),
            weights=tuple(w for p in parts for w in p.weights),
            components={f"exh[{s.label()}]": p.value for s, p in zip(chain, parts)},
            cutoffs={f"enumeration[{s.label()}]": p.cutoffs["enumeration"] for s, p in zip(chain, parts)},
            witness_classes=tuple((s.label(),) + c for s, p in zip(chain, parts) for c in p.witness_classes),
        )

    # -- dispatch ----------------------------------------------------------

    def evaluate(self, name: str, surface: Surface, sigma: Optional[Surjection] = None,
                 chain: Optional[Sequence[Surjection]] = None) -> FunctionalValue:
        if name not in FUNCTIONAL_NAMES:
            raise BadFlag(f"unknown functional {name!r}; choose from {', '.join(FUNCTIONAL_NAMES)}")
        if name in SIGMA_FUNCTIONALS and sigma is None:
            raise BadFlag(f"functional {name} needs --sigma")
        if name == "chain" and not chain:
            raise BadFlag("functional chain needs --chain")

        if name == "area":
            return self.area_value(surface)
        if name == "ell2":
            return self.ell_inv2_B(surface)
        if name == "exhm":
            return self.exh_m(surface)
        if name == "log_ell2":
            return self.log_ell2(surface)
        if name == "log_area":
            return self.log_area(surface)
        if name == "rsigma":
            ctx = self.cover_context(surface, sigma)
            return FunctionalValue("rsigma", ctx.r_sigma, components={
                "R_sigma": ctx.r_sigma, "disk_radius": ctx.disk_radius,
                "shortest_loop": ctx.shortest_loop, "in_cover": float(ctx.in_cover),
            })
        if name == "eta":
            return self.eta_sigma(surface, sigma)
        if name == "zeta":
            return self.zeta_sigma(surface, sigma)
        if name == "exhsigma":
            return self.exh_sigma(surface, sigma)
        return self.exh_chain(surface, chain)


# ---------------------------------------------------------------------------
# Module-level operations on a shared default evaluator
# ---------------------------------------------------------------------------

_default: Optional[FunctionalEvaluator] = None


def default_evaluator() -> FunctionalEvaluator:
    global _default
    if _default is None:
        _default = FunctionalEvaluator()
    return _default


def ell_inv2_B(surface: Surface) -> FunctionalValue:
    return default_evaluator().ell_inv2_B(surface)


def exh_m(surface: Surface) -> FunctionalValue:
    return default_evaluator().exh_m(surface)


def R_sigma(surface: Surface, sigma: Surjection) -> float:
    return default_evaluator().R_sigma(surface, sigma)


def in_V_sigma(surface: Surface, sigma: Surjection) -> Tuple[bool, CoverContext]:
    return default_evaluator().in_V_sigma(surface, sigma)


def eta_sigma(surface: Surface, sigma: Surjection) -> FunctionalValue:
    return default_evaluator().eta_sigma(surface, sigma)


def zeta_sigma(surface: Surface, sigma: Surjection) -> FunctionalValue:
    return default_evaluator().zeta_sigma(surface, sigma)


def exh_sigma(surface: Surface, sigma: Surjection) -> FunctionalValue:
    return default_evaluator().exh_sigma(surface, sigma)


def exh_chain(surface: Surface, chain: Sequence[Surjection]) -> FunctionalValue:
    return default_evaluator().exh_chain(surface, chain)
