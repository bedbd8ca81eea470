"""
Numerical Hessians for flatstrata
Finite-difference complex Hessians of functionals in period coordinates,
eigenvalue signatures, convexity checks, the area gradient check, the local
collision-period oracle and parametric family sweeps with slope fits.

Coordinates are the periods z_a = x_a + i y_a of the chart basis; stencil points
move the surface with ``deform``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.linalg import eigvalsh, null_space
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score
from tqdm import tqdm

from flatstrata_errors import (
    ClosureViolation,
    DeformFailed,
    FlatStrataError,
    NotHermitian,
    ParamOutOfRange,
    PolygonDegenerates,
)
from functionals import FunctionalEvaluator, FunctionalValue
from geodesics import SaddleConnectionFinder
from homology_periods import PeriodChart, cocycle_for, deform, homology_basis
from run_config import RunConfig
from strata_covers import Surjection
from surface_core import Surface, area
from surface_generators import rect_torus, slit_tori, stretched_slit_tori

logger = logging.getLogger('FlatStrata.Hessian')

Functional = Union[str, Callable[[Surface], Any]]


@dataclass
class HessianReport:
    """Hermitian FD Hessian with its eigenvalue signature (n_plus, n_minus, n_zero)."""
    functional: str
    dimension: int
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    signature: Tuple[int, int, int]
    step: float
    residual: float
    tol_eig: float
    value: float
    non_smooth: bool = False
    richardson_delta: Optional[float] = None
    signature_stable: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "functional": self.functional,
            "dimension": self.dimension,
            "matrix": [[complex(x) for x in row] for row in self.matrix],
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "signature": list(self.signature),
            "step": self.step,
            "residual": self.residual,
            "tol_eig": self.tol_eig,
            "value": self.value,
            "non_smooth": self.non_smooth,
            "richardson_delta": self.richardson_delta,
            "signature_stable": self.signature_stable,
        }


@dataclass
class ConvexityReport:
    """
    ``n_nonpositive`` counts on the cone; ``projective_signature`` is the
    signature on the complement of the scaling direction.
    """
    q: int
    n_nonpositive: int
    holds: bool
    scaling_residual: float
    report: HessianReport
    projective_signature: Tuple[int, int, int] = (0, 0, 0)


@dataclass
class SweepResult:
    family: str
    chart: str
    table: pd.DataFrame
    fits: Dict[str, Dict[str, float]]


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------

def signature(matrix: np.ndarray, tol_eig: Optional[float] = None,
              tol_eig_rel: float = 1e-5) -> Tuple[int, int, int]:
    """
    Count eigenvalues above tol, below -tol, and in between.

    tol defaults to tol_eig_rel times the spectral radius.

    Raises:
        NotHermitian: the matrix is not Hermitian
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitian(f"matrix of shape {m.shape} is not square")
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-8 * scale:
        raise NotHermitian("matrix differs from its conjugate transpose")
    eigenvalues = eigvalsh(m)
    tol = tol_eig if tol_eig is not None else tol_eig_rel * float(np.max(np.abs(eigenvalues), initial=0.0))
    n_plus = int(np.sum(eigenvalues > tol))
    n_minus = int(np.sum(eigenvalues < -tol))
    return n_plus, n_minus, len(eigenvalues) - n_plus - n_minus


# ---------------------------------------------------------------------------
# Functional plumbing
# ---------------------------------------------------------------------------

def period_modulus_squared(j: int) -> Callable[[Surface], float]:
    """f(S) = |P_j|^2 for basis cycle j of the chart."""
    def f(surface: Surface) -> float:
        return float(abs(homology_basis(surface).period_vector[j]) ** 2)
    f.__name__ = f"period_modulus_squared[{j}]"
    return f


def _as_reader(functional: Functional, evaluator: FunctionalEvaluator,
               sigma: Optional[Surjection]) -> Tuple[str, Callable[[Surface], Tuple[float, Tuple]]]:
    if isinstance(functional, str):
        def read(surface: Surface) -> Tuple[float, Tuple]:
            result = evaluator.evaluate(functional, surface, sigma=sigma)
            return result.value, result.witness_key
        return functional, read

    def read(surface: Surface) -> Tuple[float, Tuple]:
        result = functional(surface)
        if isinstance(result, FunctionalValue):
            return result.value, result.witness_key
        return float(result), ()
    return getattr(functional, "__name__", "callable"), read


def _deformed(surface: Surface, chart: PeriodChart, delta: np.ndarray) -> Surface:
    try:
        return deform(surface, chart, delta)
    except (PolygonDegenerates, ClosureViolation) as e:
        raise DeformFailed(f"stencil point at |delta| = {np.linalg.norm(delta):.3g} failed: {e}")


def real_hessians_fd(read: Callable[[np.ndarray], Sequence[Tuple[float, Tuple]]], d: int,
                     h: float, count: int) -> List[Tuple[np.ndarray, float, bool]]:
    """
    2d x 2d real Hessians of several functionals from one stencil in
    (x_1..x_d, y_1..y_d).

    ``read`` maps a period offset to one (value, witness key) pair per
    functional. Mixed partials use the seven-point form
    [f(+i+j) - f(+i) - f(+j) + 2 f0 - f(-i) - f(-j) + f(-i-j)] / 2h^2,
    so the stencil has 1 + 2n + n(n-1) points for n = 2d.

    Returns:
        one (hessian, value at the base point, witness keys changed) per functional
    """
    n = 2 * d
    values: Dict[Tuple[int, ...], np.ndarray] = {}
    keys: List[set] = [set() for _ in range(count)]

    def at(*steps: Tuple[int, int]) -> np.ndarray:
        offset = [0] * n
        for i, s in steps:
            offset[i] += s
        key = tuple(offset)
        if key not in values:
            vec = np.array(offset, dtype=float) * h
            readings = read(vec[:d] + 1j * vec[d:])
            values[key] = np.array([value for value, _ in readings], dtype=float)
            for seen, (_, witness) in zip(keys, readings):
                seen.add(witness)
        return values[key]

    f0 = at()
    hessians = np.zeros((count, n, n))
    for i in range(n):
        plus_i, minus_i = at((i, 1)), at((i, -1))
        hessians[:, i, i] = (plus_i - 2.0 * f0 + minus_i) / h ** 2
        for j in range(i + 1, n):
            plus_j, minus_j = at((j, 1)), at((j, -1))
            mixed = (at((i, 1), (j, 1)) - plus_i - plus_j + 2.0 * f0
                     - minus_i - minus_j + at((i, -1), (j, -1))) / (2.0 * h ** 2)
            hessians[:, i, j] = hessians[:, j, i] = mixed
    return [(hessians[k], float(f0[k]), len(keys[k]) > 1) for k in range(count)]


def real_hessian_fd(read: Callable[[np.ndarray], Tuple[float, Tuple]], d: int,
                    h: float) -> Tuple[np.ndarray, float, bool]:
    """Single-functional form of real_hessians_fd."""
    return real_hessians_fd(lambda z: [read(z)], d, h, 1)[0]


def complex_from_real(real_hessian: np.ndarray) -> np.ndarray:
    """H_ab = 1/4 [(Rxx + Ryy) + i (Rxy - Ryx)]."""
    d = real_hessian.shape[0] // 2
    rxx, rxy = real_hessian[:d, :d], real_hessian[:d, d:]
    ryx, ryy = real_hessian[d:, :d], real_hessian[d:, d:]
    return 0.25 * ((rxx + ryy) + 1j * (rxy - ryx))


def default_step(surface: Surface, config: RunConfig) -> float:
    length, _ = SaddleConnectionFinder(surface, config).systole()
    return config.fd_step_factor * length


def _report_from_real(name: str, d: int, h: float, tol_eig_rel: float,
                      real: np.ndarray, f0: float, non_smooth: bool) -> HessianReport:
    raw = complex_from_real(real)
    residual = float(np.linalg.norm(raw - raw.conj().T))
    hermitian = 0.5 * (raw + raw.conj().T)
    eigenvalues = np.sort(eigvalsh(hermitian))
    tol = tol_eig_rel * float(np.max(np.abs(eigenvalues), initial=0.0))
    return HessianReport(
        functional=name,
        dimension=d,
        matrix=hermitian,
        eigenvalues=eigenvalues,
        signature=signature(hermitian, tol_eig=tol),
        step=h,
        residual=residual,
        tol_eig=tol,
        value=f0,
        non_smooth=non_smooth,
    )


def _hessians_at_step(names: Sequence[str], readers: Sequence[Callable], surface: Surface,
                      chart: PeriodChart, h: float, tol_eig_rel: float) -> List[HessianReport]:
    def shifted(delta: np.ndarray):
        moved = _deformed(surface, chart, delta)
        return [read(moved) for read in readers]

    results = real_hessians_fd(shifted, chart.d, h, len(readers))
    return [_report_from_real(name, chart.d, h, tol_eig_rel, *result)
            for name, result in zip(names, results)]


def complex_hessians_fd(functionals: Sequence[Functional], surface: Surface,
                        step: Optional[float] = None,
                        evaluator: Optional[FunctionalEvaluator] = None,
                        sigma: Optional[Surjection] = None,
                        config: Optional[RunConfig] = None,
                        richardson: Optional[bool] = None) -> List[HessianReport]:
    """
    Complex Hessians d^2 f / dz_a dz_b-bar of several functionals in period
    coordinates, sharing one set of deformed stencil surfaces.

    Args:
        functionals: Functional names (see functionals.FUNCTIONAL_NAMES) or
            callables returning a float or FunctionalValue
        surface: Base point
        step: FD step h; default fd_step_factor x systole
        sigma: Surjection for the cover functionals
        richardson: Repeat at h/2 and record the change (default from config)

    Raises:
        DeformFailed: a stencil point could not be realised
    """
    config = config or (evaluator.config if evaluator else RunConfig())
    evaluator = evaluator or FunctionalEvaluator(config)
    pairs = [_as_reader(f, evaluator, sigma) for f in functionals]
    names = [name for name, _ in pairs]
    readers = [read for _, read in pairs]
    chart = homology_basis(surface)
    h = float(step) if step is not None else default_step(surface, config)
    if not h > 0:
        raise ParamOutOfRange(f"step must be positive, got {h}")

    reports = _hessians_at_step(names, readers, surface, chart, h, config.tol_eig_rel)
    if richardson is None:
        richardson = config.richardson
    if richardson:
        halves = _hessians_at_step(names, readers, surface, chart, 0.5 * h, config.tol_eig_rel)
        for report, half in zip(reports, halves):
            scale = max(float(np.linalg.norm(report.matrix)), 1e-300)
            report.richardson_delta = float(np.linalg.norm(report.matrix - half.matrix)) / scale
            report.signature_stable = half.signature == report.signature
            report.non_smooth = report.non_smooth or half.non_smooth
    for report in reports:
        if report.non_smooth:
            logger.debug(f"{report.functional}: witness basis changes inside the stencil (non-smooth point)")
        logger.debug(f"{report.functional}: signature {report.signature}, h={h:.3g}, "
                     f"eigenvalues {report.eigenvalues}")
    return reports


def complex_hessian_fd(functional: Functional, surface: Surface, step: Optional[float] = None,
                       evaluator: Optional[FunctionalEvaluator] = None,
                       sigma: Optional[Surjection] = None,
                       config: Optional[RunConfig] = None,
                       richardson: Optional[bool] = None) -> HessianReport:
    """
    Complex Hessian d^2 f / dz_a dz_b-bar in period coordinates.

    Raises:
        DeformFailed: a stencil point could not be realised
    """
    return complex_hessians_fd([functional], surface, step, evaluator, sigma, config, richardson)[0]


def projective_signature(matrix: np.ndarray, direction: np.ndarray, tol_eig: float) -> Tuple[int, int, int]:
    """
    Signature of the Hermitian form restricted to the orthogonal complement of
    ``direction``, i.e. on the tangent space of the projectivized stratum.
    """
    basis = null_space(np.asarray(direction, dtype=complex).conj().reshape(1, -1))
    restricted = basis.conj().T @ matrix @ basis
    restricted = 0.5 * (restricted + restricted.conj().T)
    return signature(restricted, tol_eig=tol_eig)


def convexity_check(functional: Functional, surface: Surface, q: int,
                    report: Optional[HessianReport] = None, **kwargs) -> ConvexityReport:
    """
    Strong q-convexity at a point: at most q-1 nonpositive eigenvalues on the
    projectivized stratum.

    A scale-invariant functional always has the scaling direction conj(P) in
    its kernel on the cone, so eigenvalues are counted on the complement of
    that direction; ``n_nonpositive`` keeps the count on the full cone. Also
    measures |H conj(P)| / (|H| |P|).
    """
    report = report or complex_hessian_fd(functional, surface, **kwargs)
    n_plus, n_minus, n_zero = report.signature
    # H_ab = d_a dbar_b, so homogeneity kills conj(P)
    periods = np.conj(homology_basis(surface).period_vector)
    norm_h = float(np.linalg.norm(report.matrix, 2))
    norm_p = float(np.linalg.norm(periods))
    if norm_h == 0 or norm_p == 0:
        scaling = 0.0
    else:
        scaling = float(np.linalg.norm(report.matrix @ periods)) / (norm_h * norm_p)
    projective = projective_signature(report.matrix, periods, report.tol_eig)
    return ConvexityReport(
        q=q,
        n_nonpositive=n_minus + n_zero,
        holds=projective[1] + projective[2] <= q - 1,
        scaling_residual=scaling,
        report=report,
        projective_signature=projective,
    )


def radical_readings(report: HessianReport, g: int, n: int, k: int) -> Dict[str, Any]:
    """Compare the measured kernel of the area Hessian with both readings k-1 and n+k-1."""
    measured = report.signature[2]
    return {
        "measured_n_zero": measured,
        "k_minus_1": k - 1,
        "n_plus_k_minus_1": n + k - 1,
        "dimension_forced": report.dimension - 2 * g,
        "readings_diverge": n > 0,
        "matches_n_plus_k_minus_1": measured == n + k - 1,
    }


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------

def _polygon_points(surface: Surface, hol: np.ndarray, anchored: bool = True) -> List[np.ndarray]:
    out = []
    for p, poly in enumerate(surface.polygons):
        pts = [poly[0] if anchored else 0j]
        for e in range(len(poly) - 1):
            idx, sign = surface.edge_index[(p, e)]
            pts.append(pts[-1] + sign * hol[idx])
        out.append(np.array(pts, dtype=complex))
    return out


def polarized_area(surface: Surface, hol_a: np.ndarray, hol_b: np.ndarray) -> float:
    """Symmetric real form with polarized_area(h, h) = area for h the edge holonomies."""
    total = 0.0
    for pa, pb in zip(_polygon_points(surface, hol_a, False), _polygon_points(surface, hol_b, False)):
        na, nb = np.roll(pa, -1), np.roll(pb, -1)
        total += 0.25 * float(np.sum(pa.real * nb.imag - pa.imag * nb.real
                                     + pb.real * na.imag - pb.imag * na.real))
    return total


def gradient_check(surface: Surface, directions: Sequence[Sequence[complex]],
                   step: float = 1e-4) -> List[Dict[str, float]]:
    """
    Central differences of the area against the analytic derivative 2 h(phi_dot, phi).
    """
    chart = homology_basis(surface)
    rows = []
    for direction in directions:
        direction = np.asarray(direction, dtype=complex)
        dot = cocycle_for(chart, direction)
        analytic = 2.0 * polarized_area(surface, dot, chart.edge_holonomy)
        plus = area(_deformed(surface, chart, step * direction))
        minus = area(_deformed(surface, chart, -step * direction))
        numeric = (plus - minus) / (2.0 * step)
        rows.append({"analytic": analytic, "numeric": numeric,
                     "error": abs(analytic - numeric) / max(1.0, abs(analytic))})
    return rows


# ---------------------------------------------------------------------------
# Collision model
# ---------------------------------------------------------------------------

def collision_constant(m1: int, m2: int) -> float:
    """|int_0^1 s^m1 (s-1)^m2 ds| = m1! m2! / (m1+m2+1)!."""
    return math.factorial(m1) * math.factorial(m2) / math.factorial(m1 + m2 + 1)


def collision_period(m1: int, m2: int, u: complex) -> float:
    """|int_0^u z^m1 (z-u)^m2 dz| by quadrature along the segment [0, u]."""
    if m1 < 0 or m2 < 0:
        raise ParamOutOfRange(f"orders must be nonnegative, got {m1}, {m2}")
    integral, _ = quad(lambda s: s ** m1 * (s - 1.0) ** m2, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return abs(integral) * abs(complex(u)) ** (m1 + m2 + 1)


# ---------------------------------------------------------------------------
# Sampling and sweeps
# ---------------------------------------------------------------------------

def random_deformation_points(surface: Surface, count: int, rng: np.random.Generator,
                              scale: float = 0.05, config: Optional[RunConfig] = None,
                              max_attempts: Optional[int] = None) -> List[Surface]:
    """Random nearby surfaces, each period moved by about scale x systole."""
    config = config or RunConfig()
    chart = homology_basis(surface)
    length, _ = SaddleConnectionFinder(surface, config).systole()
    points: List[Surface] = []
    attempts = 0
    limit = max_attempts or 20 * count
    while len(points) < count and attempts < limit:
        attempts += 1
        delta = scale * length * (rng.standard_normal(chart.d) + 1j * rng.standard_normal(chart.d))
        try:
            points.append(_deformed(surface, chart, delta))
        except DeformFailed:
            continue
    if len(points) < count:
        logger.warning(f"Only {len(points)} of {count} deformation points after {attempts} attempts")
    return points


SWEEP_FAMILIES: Dict[str, Tuple[Callable[[float], Surface], str]] = {
    "slit": (slit_tori, "loglog"),
    "stretch": (lambda h: stretched_slit_tori(0.1, h), "linear"),
    "rect": (lambda h: rect_torus(1.0, h), "linear"),
}


def sweep_grid(family: str, start: float, stop: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise ParamOutOfRange(f"a sweep needs at least 2 steps, got {steps}")
    if SWEEP_FAMILIES.get(family, (None, ""))[1] == "loglog":
        return np.geomspace(start, stop, steps)
    return np.linspace(start, stop, steps)


def _chart_xy(chart: str, params: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if chart == "loglog":
        return np.log(1.0 / params), np.log(values)
    return params, values


def family_sweep(family: str, grid: Sequence[float], functionals: Sequence[str],
                 evaluator: Optional[FunctionalEvaluator] = None,
                 progress: Optional[bool] = None) -> SweepResult:
    """
    Evaluate functionals along a builtin family and fit slopes.

    Families: slit (slit_tori(t), fitted log value vs log(1/t)), stretch
    (stretched_slit_tori(0.1, h), linear) and rect (rect_torus(1, h), linear).
    Points that raise are kept as gaps with the error class in ``flags``.
    """
    if family not in SWEEP_FAMILIES:
        raise ParamOutOfRange(f"unknown sweep family {family!r}; choose from {sorted(SWEEP_FAMILIES)}")
    generator, chart = SWEEP_FAMILIES[family]
    evaluator = evaluator or FunctionalEvaluator()
    show = evaluator.config.progress if progress is None else progress

    rows = []
    for param in tqdm(list(grid), desc=f"Sweep {family}", disable=not show):
        try:
            surface = generator(float(param))
        except FlatStrataError as e:
            rows.extend({"param": float(param), "functional": name, "value": float("nan"),
                         "flags": type(e).__name__} for name in functionals)
            continue
        for name in functionals:
            try:
                value, flags = evaluator.evaluate(name, surface).value, ""
            except FlatStrataError as e:
                logger.debug(f"{family}({param}) {name}: {e}")
                value, flags = float("nan"), type(e).__name__
            rows.append({"param": float(param), "functional": name, "value": value, "flags": flags})
    table = pd.DataFrame(rows, columns=["param", "functional", "value", "flags"])

    fits: Dict[str, Dict[str, float]] = {}
    for name in functionals:
        sub = table[(table["functional"] == name) & np.isfinite(table["value"])]
        if chart == "loglog":
            sub = sub[sub["value"] > 0]
        if len(sub) < 2:
            continue
        x, y = _chart_xy(chart, sub["param"].to_numpy(), sub["value"].to_numpy())
        model = LinearRegression().fit(x.reshape(-1, 1), y)
        fits[name] = {
            "slope": float(model.coef_[0]),
            "intercept": float(model.intercept_),
            "r2": float(r2_score(y, model.predict(x.reshape(-1, 1)))),
        }
        logger.info(f"Sweep {family}/{name}: slope={fits[name]['slope']:.6g}, r2={fits[name]['r2']:.6g}")
    return SweepResult(family=family, chart=chart, table=table, fits=fits)
