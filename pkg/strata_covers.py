"""
Strata and Covers for flatstrata
Collision patterns of marked points: surjections, pushforward of orders,
the refinement order, lexicographic representatives, automorphism counts,
the stratification table of the Hodge bundle and the cohomological-dimension
bound arithmetic.

Surjections use 1-based images, as in {1..n+k} -> {1..n+l}, and restrict to
the identity on {1..n}.
"""

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import pandas as pd
from sympy.utilities.iterables import partitions

from flatstrata_errors import GenusTooSmall, InvalidSurjection, ParamOutOfRange, SizeMismatch

logger = logging.getLogger('FlatStrata.Covers')


@dataclass(frozen=True)
class Surjection:
    """A map {1..n+k} -> {1..n+l} onto, fixing 1..n."""
    n: int
    images: Tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(x) for x in self.images)
        object.__setattr__(self, "images", images)
        if self.n < 0 or len(images) < max(self.n, 1):
            raise InvalidSurjection(f"domain of size {len(images)} too small for n={self.n}")
        if any(images[i] != i + 1 for i in range(self.n)):
            raise InvalidSurjection(f"{images} does not fix 1..{self.n}")
        top = max(images)
        if min(images) < 1 or set(images) != set(range(1, top + 1)):
            raise InvalidSurjection(f"{images} is not onto 1..{top}")

    @property
    def domain_size(self) -> int:
        return len(self.images)

    @property
    def codomain_size(self) -> int:
        return max(max(self.images), self.n)

    @property
    def k(self) -> int:
        return self.domain_size - self.n

    @property
    def l(self) -> int:
        return self.codomain_size - self.n

    @property
    def depth(self) -> int:
        return self.k - self.l

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def fibers(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(
            tuple(i + 1 for i, x in enumerate(self.images) if x == j)
            for j in range(1, self.codomain_size + 1)
        )

    def normalize(self) -> "Surjection":
        """Lexicographic representative: tail values relabelled in order of first appearance."""
        relabel: Dict[int, int] = {j: j for j in range(1, self.n + 1)}
        nxt = self.n + 1
        out = []
        for x in self.images:
            if x not in relabel:
                relabel[x] = nxt
                nxt += 1
            out.append(relabel[x])
        return Surjection(self.n, tuple(out))

    def is_lexicographic(self) -> bool:
        return self.normalize().images == self.images

    def label(self) -> str:
        return ",".join(str(x) for x in self.images)


def identity(n: int, k: int) -> Surjection:
    return Surjection(n, tuple(range(1, n + k + 1)))


def full_collapse(n: int, k: int) -> Surjection:
    """The coarsest pattern: every zero collides with p_1 (or with each other when n = 0)."""
    return Surjection(n, tuple(range(1, n + 1)) + (1,) * k)


def parse_sigma(text: str, n: int) -> Surjection:
    try:
        images = tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok)
    except ValueError:
        raise InvalidSurjection(f"cannot parse surjection {text!r}")
    return Surjection(n, images)


def _check_compatible(a: Surjection, b: Surjection):
    if a.n != b.n or a.domain_size != b.domain_size:
        raise SizeMismatch(
            f"surjections on different domains: (n={a.n}, {a.domain_size}) vs (n={b.n}, {b.domain_size})"
        )


def pushforward_m(sigma: Surjection, m: Sequence[int]) -> Tuple[int, ...]:
    """(sigma_* m)_j = sum of m_i over sigma(i) = j."""
    if len(m) != sigma.domain_size:
        raise SizeMismatch(f"signature length {len(m)} != domain size {sigma.domain_size}")
    out = [0] * sigma.codomain_size
    for i, x in enumerate(sigma.images):
        out[x - 1] += int(m[i])
    return tuple(out)


def leq(sigma_prime: Surjection, sigma: Surjection) -> bool:
    """sigma' <= sigma iff sigma' = tau o sigma, i.e. the fibers of sigma refine those of sigma'."""
    _check_compatible(sigma_prime, sigma)
    tau: Dict[int, int] = {}
    for x, y in zip(sigma.images, sigma_prime.images):
        if tau.setdefault(x, y) != y:
            return False
    return True


def equivalent(a: Surjection, b: Surjection) -> bool:
    _check_compatible(a, b)
    return a.normalize().images == b.normalize().images


def compose(tau: Surjection, sigma: Surjection) -> Surjection:
    """tau o sigma."""
    if tau.domain_size != sigma.codomain_size or tau.n != sigma.n:
        raise SizeMismatch(f"cannot compose: tau has domain {tau.domain_size}, sigma codomain {sigma.codomain_size}")
    return Surjection(sigma.n, tuple(tau(x) for x in sigma.images))


def enumerate_lex(n: int, k: int, l: int) -> List[Surjection]:
    """
    All lexicographic surjections {1..n+k} -> {1..n+l} fixing 1..n.

    Tail elements may land on the prefix (a zero meeting a marked point) or
    open the next new block; the list is sorted by images.
    """
    if not 0 <= l <= k:
        return []
    prefix = tuple(range(1, n + 1))
    found: List[Surjection] = []

    def extend(tail: List[int], opened: int):
        remaining = k - len(tail)
        if l - opened > remaining:
            return
        if remaining == 0:
            if opened == l:
                found.append(Surjection(n, prefix + tuple(tail)))
            return
        for value in range(1, n + opened + 1):
            extend(tail + [value], opened)
        if opened < l:
            extend(tail + [n + opened + 1], opened + 1)

    extend([], 0)
    found.sort(key=lambda s: s.images)
    return found


def aut_order(n: int, m: Sequence[int]) -> int:
    """Order of the group of tail permutations preserving m."""
    counts = Counter(int(x) for x in m[n:])
    return math.prod(math.factorial(c) for c in counts.values())


def stratification_depth(g: int, n: int) -> int:
    return 2 * g - 3 + (0 if n == 0 else 1)


def cohdim_bounds(g: int, n: int) -> Dict[str, int]:
    """
    Cohomological-dimension bound arithmetic.

    Returns the bounds for the moduli space, the Hodge bundle and a single
    stratum, the stratification depth, Harer's number, the conjectural value,
    and the dimension of the moduli space with its de Rham lower bound.
    """
    if g < 2:
        raise GenusTooSmall(f"genus {g} < 2")
    if n < 0:
        raise ParamOutOfRange(f"n must be >= 0, got {n}")
    eps = 0 if n == 0 else 1
    record = {
        "moduli_bound": 2 * g - 2 + eps,
        "hodge_bound": 3 * g - 3 + eps,
        "strata_bound": g,
        "depth": 2 * g - 3 + eps,
        "harer": 4 * g - 5 + n + eps,
        "looijenga_conjecture": g - 2 + eps,
        "moduli_dimension": 3 * g - 3 + n,
    }
    record["de_rham_lower_bound"] = record["harer"] - record["moduli_dimension"]
    checks = (
        record["hodge_bound"] == record["strata_bound"] + record["depth"],
        record["moduli_bound"] == record["hodge_bound"] - (g - 1),
        record["de_rham_lower_bound"] == record["looijenga_conjecture"],
    )
    if not all(checks):
        raise ArithmeticError(f"bound identities fail for g={g}, n={n}: {checks}")
    return record


def stratum_signatures(g: int, n: int, depth: int) -> List[Tuple[int, ...]]:
    """
    Signatures (a_1..a_n, tail) of depth ``depth``: a_i zeros collide with p_i,
    the remaining zeros form 2g-2-depth tail points, tail sorted decreasing.
    """
    total = 2 * g - 2
    tail_len = total - depth
    found = set()
    for prefix in itertools.product(range(total + 1), repeat=n):
        rest = total - sum(prefix)
        if rest < tail_len or (tail_len == 0 and rest != 0):
            continue
        if tail_len == 0:
            found.add(tuple(prefix))
            continue
        for part in partitions(rest, m=tail_len):
            if sum(part.values()) != tail_len:
                continue
            tail = tuple(sorted((size for size, mult in part.items() for _ in range(mult)), reverse=True))
            found.add(tuple(prefix) + tail)
    return sorted(found)


def stratification_table(g: int, n: int) -> pd.DataFrame:
    """
    Strata of the projectivized Hodge bundle by depth.

    Columns: depth, signature, aut_order, proj_dimension (2g-2+n+k with k the
    number of zeros).
    """
    if g < 2:
        raise GenusTooSmall(f"genus {g} < 2")
    rows = []
    for depth in range(stratification_depth(g, n) + 1):
        for m in stratum_signatures(g, n, depth):
            k = len(m) - n
            rows.append({
                "depth": depth,
                "signature": "(" + ",".join(str(x) for x in m) + ")",
                "aut_order": aut_order(n, m),
                "proj_dimension": 2 * g - 2 + n + k,
            })
    logger.debug(f"Stratification table g={g}, n={n}: {len(rows)} strata")
    return pd.DataFrame(rows, columns=["depth", "signature", "aut_order", "proj_dimension"])


def strict_chains(n: int, k: int) -> List[Tuple[Surjection, ...]]:
    """All strictly decreasing chains sigma_0 > sigma_1 > ... of lexicographic surjections."""
    nodes = [s for l in range(k + 1) for s in enumerate_lex(n, k, l)]
    below: Dict[Tuple[int, ...], List[Surjection]] = {
        s.images: [t for t in nodes if t.images != s.images and leq(t, s)] for s in nodes
    }
    chains: List[Tuple[Surjection, ...]] = []

    def grow(chain: Tuple[Surjection, ...]):
        chains.append(chain)
        for t in below[chain[-1].images]:
            grow(chain + (t,))

    for s in nodes:
        grow((s,))
    return chains


def is_strictly_decreasing(chain: Sequence[Surjection]) -> bool:
    for a, b in zip(chain, chain[1:]):
        if not leq(b, a) or equivalent(a, b):
            return False
    return True


@dataclass
class AdaptednessReport:
    comparable: bool
    samples: int
    in_sigma: int
    in_tau: int
    joint: int
    consistent: bool


def cover_adaptedness_probe(surface_samples: Iterable, sigma: Surjection, tau: Surjection,
                            evaluator=None) -> AdaptednessReport:
    """
    Count joint membership in V_sigma and V_tau over sample surfaces.

    For incomparable sigma, tau the joint count must be zero.
    """
    from functionals import FunctionalEvaluator

    _check_compatible(sigma, tau)
    evaluator = evaluator or FunctionalEvaluator()
    comparable = leq(sigma, tau) or leq(tau, sigma)
    samples = in_sigma = in_tau = joint = 0
    for surface in surface_samples:
        samples += 1
        a, _ = evaluator.in_V_sigma(surface, sigma)
        b, _ = evaluator.in_V_sigma(surface, tau)
        in_sigma += int(a)
        in_tau += int(b)
        joint += int(a and b)
    consistent = comparable or joint == 0
    if not consistent:
        logger.error(f"Incomparable {sigma.label()} and {tau.label()} met on {joint} samples")
    return AdaptednessReport(comparable, samples, in_sigma, in_tau, joint, consistent)
