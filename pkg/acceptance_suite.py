#!/usr/bin/env python3
"""
Acceptance Suite for flatstrata
Runs the desk-scale acceptance checks (stratum recognition, saddle-connection
oracle, homogeneity, Hessian signatures, convexity, divergence laws, greedy
supremum, cover constants, combinatorics, bound arithmetic) and writes a
summary report.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from flatstrata_errors import DeformFailed, FlatStrataError
from functionals import FunctionalEvaluator, chi, cover_constant
from geodesics import SaddleConnectionFinder
from homology_periods import class_of, deform, homology_basis
from numerics_hessian import (
    collision_period,
    complex_hessian_fd,
    complex_hessians_fd,
    convexity_check,
    family_sweep,
    radical_readings,
    random_deformation_points,
)
from report_io import to_jsonable
from run_config import RunConfig
from strata_covers import (
    Surjection,
    aut_order,
    cohdim_bounds,
    compose,
    cover_adaptedness_probe,
    enumerate_lex,
    full_collapse,
    identity,
    leq,
    pushforward_m,
    stratification_depth,
    stratification_table,
)
from surface_core import area, rescale, topology
from surface_generators import (
    genus_two_builtins,
    marked_slit_tori,
    regular_octagon,
    slit_tori,
    square_torus,
)


@dataclass
class CheckResult:
    """Outcome of one acceptance check."""
    name: str
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    duration: float = 0.0
    error: Optional[str] = None


def primitive_vector_count(max_length: float) -> int:
    """Primitive integer vectors of length <= max_length (square-torus oracle)."""
    bound = int(math.floor(max_length))
    count = 0
    for a in range(-bound, bound + 1):
        for b in range(-bound, bound + 1):
            if (a, b) != (0, 0) and a * a + b * b <= max_length ** 2 + 1e-9 and math.gcd(a, b) == 1:
                count += 1
    return count


def random_independent_total(pool, weights, ambient, rank: int, rng: np.random.Generator) -> float:
    """Weight of a basis drawn by scanning the pool in random order."""
    order = rng.permutation(len(pool))
    span: List[np.ndarray] = []
    total = 0.0
    for i in order:
        vec = np.asarray(ambient(pool[i]), dtype=float)
        residual = vec.copy()
        for q in span:
            residual -= (q @ residual) * q
        norm = float(np.linalg.norm(residual))
        if norm <= 1e-8 * max(1.0, float(np.linalg.norm(vec))):
            continue
        span.append(residual / norm)
        total += weights[i]
        if len(span) == rank:
            return total
    return math.nan


def _relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class AcceptanceSuite:
    """
    Evaluation framework for the acceptance criteria.
    Each check returns a CheckResult; failures never stop the run.
    """

    def __init__(self, config: Optional[RunConfig] = None, quick: bool = False,
                 logger: Optional[logging.Logger] = None):
        self.config = config or RunConfig()
        self.quick = quick
        self.logger = logger or logging.getLogger('FlatStrata.Verify')
        self.evaluator = FunctionalEvaluator(self.config)
        self.rng = np.random.default_rng(self.config.seed)
        self.results: List[CheckResult] = []

        self.checks: List[Callable[[], Dict[str, Any]]] = [
            self.check_stratum_recognition,
            self.check_saddle_oracle,
            self.check_homogeneity,
            self.check_hessian_signatures,
            self.check_convexity,
            self.check_divergence_laws,
            self.check_greedy_supremum,
            self.check_cover_constants,
            self.check_combinatorics,
            self.check_bound_arithmetic,
        ]

    def _samples(self, full: int, quick: int) -> int:
        return quick if self.quick else full

    # -- checks ------------------------------------------------------------

    def check_stratum_recognition(self) -> Dict[str, Any]:
        expected = {
            "regular_octagon": (regular_octagon(), 2, (2,)),
            "slit_tori(0.3)": (slit_tori(0.3), 2, (1, 1)),
            "square_torus": (square_torus(), 1, (0,)),
        }
        details: Dict[str, Any] = {"ok": True}
        samples = self._samples(200, 10)
        for label, (surface, g, m) in expected.items():
            sig = topology(surface)
            ok = sig.g == g and sig.m == m
            chart = homology_basis(surface)
            scale = 0.02 * min(abs(z) for z in chart.period_vector if abs(z) > 0)
            bad = tested = 0
            for _ in range(samples):
                delta = scale * (self.rng.standard_normal(chart.d) + 1j * self.rng.standard_normal(chart.d))
                try:
                    moved = topology(deform(surface, chart, delta))
                except FlatStrataError:
                    continue
                tested += 1
                bad += int(sum(moved.m) != 2 * moved.g - 2)
            details[label] = {"signature": sig.label(), "genus": sig.g, "deformations": tested,
                              "gauss_bonnet_failures": bad}
            details["ok"] &= ok and bad == 0 and tested > 0
        return details

    def check_saddle_oracle(self) -> Dict[str, Any]:
        finder = SaddleConnectionFinder(square_torus(), self.config)
        details: Dict[str, Any] = {"ok": True}
        for cutoff in (1.0, 1.5, 2.3, 5.0):
            found = len(finder.enumerate(cutoff))
            oracle = primitive_vector_count(cutoff)
            details[str(cutoff)] = {"found": found, "oracle": oracle}
            details["ok"] &= found == oracle
        return details

    def check_homogeneity(self) -> Dict[str, Any]:
        surfaces = genus_two_builtins()
        if self.quick:
            surfaces = {"regular_octagon": surfaces["regular_octagon"]}
        details: Dict[str, Any] = {"ok": True}
        worst = 0.0
        for label, surface in surfaces.items():
            sigma = identity(surface.n, surface.num_marks - surface.n)
            base = {
                "area": area(surface),
                "ell2": self.evaluator.ell_inv2_B(surface).value,
                "rsigma": self.evaluator.R_sigma(surface, sigma),
                "exhm": self.evaluator.exh_m(surface).value,
                "eta": self.evaluator.eta_sigma(surface, sigma).value,
                "exhsigma": self.evaluator.exh_sigma(surface, sigma).value,
            }
            for lam in (2.0, 1j, 0.3 + 0.4j):
                moved = rescale(surface, lam)
                factor = abs(lam)
                scaled = {
                    "area": (area(moved), base["area"] * factor ** 2),
                    "ell2": (self.evaluator.ell_inv2_B(moved).value, base["ell2"] * factor ** -2),
                    "rsigma": (self.evaluator.R_sigma(moved, sigma), base["rsigma"] * factor),
                    "exhm": (self.evaluator.exh_m(moved).value, base["exhm"]),
                    "eta": (self.evaluator.eta_sigma(moved, sigma).value, base["eta"]),
                    "exhsigma": (self.evaluator.exh_sigma(moved, sigma).value, base["exhsigma"]),
                }
                for name, (got, want) in scaled.items():
                    worst = max(worst, _relative_error(got, want))
            details[label] = base

        # a collapsing surjection near the collision, where the cover quotient is nontrivial
        slit = slit_tori(1e-3)
        collapse = full_collapse(0, 2)
        exponents = {"rsigma": 1, "eta": 0, "zeta": 0, "exhsigma": 0}
        base = {name: self.evaluator.evaluate(name, slit, sigma=collapse).value for name in exponents}
        for lam in (2.0, 1j, 0.3 + 0.4j):
            moved = rescale(slit, lam)
            for name, power in exponents.items():
                got = self.evaluator.evaluate(name, moved, sigma=collapse).value
                worst = max(worst, _relative_error(got, base[name] * abs(lam) ** power))
        details["slit_tori(1e-3)/collapse"] = base
        details["collapse_disk_rank"] = self.evaluator.eta_sigma(slit, collapse).components["disk_rank"]
        details["worst_relative_error"] = worst
        details["ok"] = worst < 1e-9 and details["collapse_disk_rank"] == 1.0 and base["zeta"] > 0
        return details

    def check_hessian_signatures(self) -> Dict[str, Any]:
        octagon = regular_octagon()
        area_report, log_report = complex_hessians_fd(["area", "log_area"], octagon,
                                                      evaluator=self.evaluator, richardson=True)
        slit_report = complex_hessian_fd("area", slit_tori(0.3), evaluator=self.evaluator, richardson=True)
        readings = radical_readings(slit_report, g=2, n=0, k=2)
        reports = (area_report, log_report, slit_report)
        residual_ok = all(r.residual <= 10 * r.tol_eig for r in reports)
        return {
            "octagon_area": list(area_report.signature),
            "octagon_log_area": list(log_report.signature),
            "slit_area": list(slit_report.signature),
            "slit_radical": readings,
            "residuals": [r.residual for r in reports],
            "stable": [r.signature_stable for r in reports],
            "ok": (area_report.signature == (2, 2, 0)
                   and log_report.signature == (1, 2, 1)
                   and slit_report.signature[2] == 1
                   and readings["matches_n_plus_k_minus_1"]
                   and residual_ok
                   and all(r.signature_stable for r in reports)),
        }

    def check_convexity(self) -> Dict[str, Any]:
        samples = self._samples(self.config.deformation_samples, 2)
        surfaces = genus_two_builtins()
        if self.quick:
            surfaces = {"regular_octagon": surfaces["regular_octagon"]}
        details: Dict[str, Any] = {"ok": True}
        for label, surface in surfaces.items():
            g = topology(surface).g
            visited = smooth = violations = ell_failures = 0
            progress = tqdm(total=samples, desc=f"Convexity {label}", disable=not self.config.progress)
            # draw in batches until enough smooth points are collected
            while smooth < samples and visited < 4 * samples:
                batch = random_deformation_points(surface, samples - smooth, self.rng, config=self.config)
                if not batch:
                    break
                for point in batch:
                    visited += 1
                    try:
                        exh_report, ell = complex_hessians_fd(["exhm", "ell2"], point,
                                                              evaluator=self.evaluator, richardson=False)
                    except DeformFailed:
                        continue
                    if exh_report.non_smooth or ell.non_smooth:
                        continue
                    exh = convexity_check("exhm", point, g + 1, report=exh_report)
                    smooth += 1
                    progress.update(1)
                    violations += int(not exh.holds)
                    ell_failures += int(ell.signature[0] != ell.dimension)
            progress.close()
            details[label] = {"points": visited, "smooth": smooth,
                              "exh_violations": violations, "ell2_not_definite": ell_failures}
            details["ok"] &= violations == 0 and ell_failures == 0 and smooth >= samples
        return details

    def check_divergence_laws(self) -> Dict[str, Any]:
        slit_grid = np.geomspace(1e-4, 1e-1, self._samples(7, 4))
        slit = family_sweep("slit", slit_grid, ["ell2"], self.evaluator, progress=self.config.progress)
        stretch_grid = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0]
        stretch = family_sweep("stretch", stretch_grid, ["area", "exhm"], self.evaluator,
                               progress=self.config.progress)
        exhm = stretch.table[stretch.table["functional"] == "exhm"]["value"].to_numpy()
        u = 0.37
        collision = collision_period(1, 1, u)
        details = {
            "slit_slope": slit.fits["ell2"]["slope"],
            "stretch_area_slope": stretch.fits["area"]["slope"],
            "stretch_exhm_increasing": bool(np.all(np.diff(exhm) > 0)),
            "collision_error": abs(collision - u ** 3 / 6.0),
        }
        details["ok"] = (abs(details["slit_slope"] - 2.0) <= 0.05
                         and abs(details["stretch_area_slope"] - 1.0) <= 1e-6
                         and details["stretch_exhm_increasing"]
                         and details["collision_error"] <= 1e-10)
        return details

    def check_greedy_supremum(self) -> Dict[str, Any]:
        trials = self._samples(1000, 100)
        details: Dict[str, Any] = {"ok": True}
        for label, surface in (("regular_octagon", regular_octagon()), ("slit_tori(0.3)", slit_tori(0.3))):
            value = self.evaluator.ell_inv2_B(surface)
            chart = homology_basis(surface)
            pool = SaddleConnectionFinder(surface, self.config).enumerate(value.cutoffs["enumeration"])
            weights = [sc.length ** -2 for sc in pool]
            ambient = lambda sc, s=surface, c=chart: class_of(s, c, sc)
            draws = [random_independent_total(pool, weights, ambient, chart.d, self.rng) for _ in range(trials)]
            best_random = max(x for x in draws if not math.isnan(x))
            details[label] = {"greedy": value.value, "best_random": best_random}
            details["ok"] &= value.value >= best_random - 1e-12

        slit = slit_tori(1e-3)
        collapse = full_collapse(0, 2)
        eta = self.evaluator.eta_sigma(slit, collapse)
        zeta = self.evaluator.zeta_sigma(slit, collapse)
        bases = self.evaluator.cover_bases(slit, collapse)
        quotient_rank = homology_basis(slit).d - bases.disk_rank
        quotient_weights = [sc.length ** -2 for sc in bases.quotient_pool]
        disk_weights = [abs(sc.holonomy) ** 2 for sc in bases.disk_pool]
        best_quotient = best_zeta = -math.inf
        for _ in range(trials):
            q = random_independent_total(bases.quotient_pool, quotient_weights, bases.quotient,
                                         quotient_rank, self.rng)
            k = random_independent_total(bases.disk_pool, disk_weights, bases.full,
                                         bases.disk_rank, self.rng)
            if not math.isnan(q):
                best_quotient = max(best_quotient, q)
                if not math.isnan(k):
                    best_zeta = max(best_zeta, k * q)
        details["slit_collapse"] = {"eta": eta.value, "zeta": zeta.value,
                                    "disk_rank": eta.components["disk_rank"],
                                    "eta_best_random": bases.area * best_quotient,
                                    "zeta_best_random": best_zeta}
        details["ok"] &= eta.components["disk_rank"] == 1.0
        details["ok"] &= eta.value >= bases.area * best_quotient * (1 - 1e-12)
        details["ok"] &= zeta.value >= best_zeta * (1 - 1e-12)
        return details

    def _zeta_at(self, t: float, sigma: Surjection) -> Optional[float]:
        surface = slit_tori(t)
        inside, _ = self.evaluator.in_V_sigma(surface, sigma)
        return self.evaluator.zeta_sigma(surface, sigma).value if inside else None

    def check_cover_constants(self) -> Dict[str, Any]:
        c = cover_constant(2, 0)
        sigma = full_collapse(0, 2)
        details: Dict[str, Any] = {
            "c": c,
            "c_exact": c == 1.0 / 4096,
            "chi_0": chi(0.0, c),
            "chi_half": chi(0.5 * c, c),
        }

        small = self.evaluator.exh_sigma(slit_tori(1e-3), sigma).value
        details["exh_small_t"] = small

        # bisection for the U_sigma boundary zeta = c along slit_tori(t)
        lo, hi = 1e-3, 1e-3
        while True:
            hi *= 2.0
            zeta = self._zeta_at(hi, sigma)
            if zeta is None or zeta >= c:
                break
        for _ in range(self._samples(40, 25)):
            mid = 0.5 * (lo + hi)
            zeta = self._zeta_at(mid, sigma)
            if zeta is not None and zeta < c:
                lo = mid
            else:
                hi = mid
        approach = [lo - (lo - 1e-3) * f for f in (0.5, 0.1, 0.01)] + [lo]
        values = [self.evaluator.exh_sigma(slit_tori(t), sigma) for t in approach]
        details["boundary_t"] = lo
        details["exh_approach"] = [v.value for v in values]
        details["chi_at_boundary"] = values[-1].components["chi"]

        # just inside the V_sigma exit
        t = lo
        while True:
            nxt = t * 1.05
            if not self.evaluator.in_V_sigma(slit_tori(nxt), sigma)[0]:
                break
            t = nxt
        exit_t = t
        details["exit_t"] = exit_t
        details["zeta_at_exit"] = self.evaluator.zeta_sigma(slit_tori(exit_t), sigma).value

        details["ok"] = (details["c_exact"] and details["chi_0"] == 1.0 and details["chi_half"] == 2.0
                         and math.isfinite(small)
                         and all(np.diff(details["exh_approach"]) > 0)
                         and details["chi_at_boundary"] > 1e3
                         and details["zeta_at_exit"] >= 0.9 * c)
        return details

    def check_combinatorics(self) -> Dict[str, Any]:
        details: Dict[str, Any] = {"ok": True}
        max_genus = 3 if self.quick else 5
        mismatches = 0
        for g in range(2, max_genus + 1):
            for n in (0, 1):
                table = stratification_table(g, n)
                k = 2 * g - 2
                m = (0,) * n + (1,) * k
                for depth in range(stratification_depth(g, n) + 1):
                    brute = set()
                    for sigma in enumerate_lex(n, k, k - depth):
                        pushed = pushforward_m(sigma, m)
                        brute.add(pushed[:n] + tuple(sorted(pushed[n:], reverse=True)))
                    listed = table[table["depth"] == depth]
                    mismatches += int(len(brute) != len(listed))
                    for signature in brute:
                        mismatches += int(
                            "(" + ",".join(str(x) for x in signature) + ")" not in set(listed["signature"])
                        )
        details["table_mismatches"] = mismatches

        axiom_failures = 0
        for n in (0, 1):
            for k in range(1, 5):
                nodes = [s for l in range(k + 1) for s in enumerate_lex(n, k, l)]
                m = tuple(range(1, n + k + 1))
                for a in nodes:
                    axiom_failures += int(not leq(a, a))
                    for b in nodes:
                        if leq(a, b) and leq(b, a) and a.images != b.images:
                            axiom_failures += 1
                        if leq(a, b):
                            # a = tau o b: pushing forward in two steps agrees
                            tau_images = {}
                            for x, y in zip(b.images, a.images):
                                tau_images[x] = y
                            tau = Surjection(n, tuple(tau_images[x] for x in range(1, b.codomain_size + 1)))
                            if compose(tau, b).images != a.images:
                                axiom_failures += 1
                            if pushforward_m(tau, pushforward_m(b, m)) != pushforward_m(a, m):
                                axiom_failures += 1
                            for c in nodes:
                                if leq(b, c) and not leq(a, c):
                                    axiom_failures += 1
        details["axiom_failures"] = axiom_failures

        samples = self._samples(100, 10)
        surfaces = []
        while len(surfaces) < samples:
            t = float(self.rng.uniform(1e-3, 0.3))
            x = float(self.rng.uniform(t + 0.05, 0.95))
            surfaces.append(marked_slit_tori(t, x))
        pairs = [((1, 1, 2), (1, 2, 1)), ((1, 2, 2), (1, 1, 2)), ((1, 2, 2), (1, 2, 1))]
        joint = 0
        for a, b in pairs:
            report = cover_adaptedness_probe(surfaces, Surjection(1, a), Surjection(1, b), self.evaluator)
            joint += report.joint
        details["incomparable_joint"] = joint
        details["aut_order_check"] = aut_order(0, (1, 1, 2)) == 2
        details["ok"] = mismatches == 0 and axiom_failures == 0 and joint == 0 and details["aut_order_check"]
        return details

    def check_bound_arithmetic(self) -> Dict[str, Any]:
        failures = 0
        for g in range(2, 21):
            for n in range(0, 21):
                eps = 0 if n == 0 else 1
                b = cohdim_bounds(g, n)
                got = (b["moduli_bound"], b["hodge_bound"], b["strata_bound"], b["depth"])
                failures += int(got != (2 * g - 2 + eps, 3 * g - 3 + eps, g, 2 * g - 3 + eps))
                failures += int(b["hodge_bound"] != b["strata_bound"] + b["depth"])
        return {"failures": failures, "ok": failures == 0}

    # -- driver ------------------------------------------------------------

    def run(self) -> Dict[str, Any]:
        self.logger.info("=" * 60)
        self.logger.info(f"FLATSTRATA ACCEPTANCE SUITE{' (quick)' if self.quick else ''}")
        self.logger.info("=" * 60)
        start = time.time()
        self.results = []
        for check in tqdm(self.checks, desc="Acceptance", disable=not self.config.progress):
            name = check.__name__.replace("check_", "")
            t0 = time.time()
            try:
                details = check()
                passed = bool(details.pop("ok"))
                result = CheckResult(name, passed, details, time.time() - t0)
            except Exception as e:
                self.logger.debug(f"Check {name} raised", exc_info=True)
                result = CheckResult(name, False, {}, time.time() - t0, f"{type(e).__name__}: {e}")
            self.results.append(result)
            self.logger.info(f"{'✅' if result.passed else '❌'} {name} ({result.duration:.1f}s)")
        return self._generate_report(time.time() - start)

    def _generate_report(self, duration: float) -> Dict[str, Any]:
        passed = sum(1 for r in self.results if r.passed)
        report = {
            "summary": {
                "total": len(self.results),
                "passed": passed,
                "failed": len(self.results) - passed,
                "quick": self.quick,
                "seed": self.config.seed,
            },
            "checks": [asdict(r) for r in self.results],
        }
        self.logger.info("=" * 60)
        self.logger.info(f"Passed {passed}/{len(self.results)} checks in {duration:.1f}s")
        self.logger.info("=" * 60)
        return report

    def save_report(self, report: Dict[str, Any], directory: str = ".") -> Path:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        path = Path(directory) / f"verify_report_{timestamp}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(to_jsonable(report), f, sort_keys=True, indent=2, ensure_ascii=False)
        self.logger.info(f"📊 Report saved to: {path}")
        return path
