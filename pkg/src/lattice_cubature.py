"""
Cubature rules on the torus: Fibonacci, rank-1 Korobov, tensor grids and Monte Carlo.

Lattice nodes are stored as integer numerators over a common denominator N and
scaled by 2pi only when a function is evaluated, so membership in the dual
lattice {k : (k, g) = 0 mod N for every generator g} is decided in integer
arithmetic.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DimensionMismatchError, NonLatticeRuleError, NotPrimeError, InvalidClassError
from .fourier_core import (
    TrigPolynomial, box_points, evaluate, evaluate_on_lattice, kernel_weights,
)
from .models import (
    ClassKind, ClassSpec, FrequencyBox, KappaInterval, Rank1Generator, RuleKind, RuleTag,
)

logger = logging.getLogger(__name__)

INT64_MAX = 2 ** 63 - 1
_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class CubatureRule:
    """Nodes xi^1..xi^m in [0, 2pi)^d with weights lambda_1..lambda_m."""
    d: int
    tag: RuleTag
    numerators: Optional[np.ndarray] = field(default=None, repr=False)
    denominator: Optional[int] = None
    generators: Optional[np.ndarray] = field(default=None, repr=False)
    points: Optional[np.ndarray] = field(default=None, repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)  # None means 1/m each

    @property
    def is_lattice(self) -> bool:
        return self.numerators is not None and self.generators is not None

    @property
    def equal_weights(self) -> bool:
        return self.weights is None

    @property
    def m(self) -> int:
        return len(self.numerators) if self.numerators is not None else len(self.points)

    @property
    def rule_id(self) -> str:
        return self.tag.rule_id

    @property
    def nodes(self) -> np.ndarray:
        if self.numerators is not None:
            return 2 * np.pi * self.numerators / self.denominator
        return self.points

    @property
    def weight_vector(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.m, 1.0 / self.m)
        return self.weights

    @property
    def weight_sum(self) -> float:
        """Exactly 1 for equal-weight rules."""
        if self.weights is None:
            return 1.0
        return math.fsum(self.weights)

    def to_payload(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"tag": self.tag.kind.value, "d": self.d, "m": self.m}
        if self.tag.generator is not None:
            payload["generator"] = list(self.tag.generator)
        if self.tag.seed is not None:
            payload["seed"] = self.tag.seed
        if self.tag.n is not None:
            payload["n"] = self.tag.n
        if self.numerators is not None:
            payload["nodes"] = [[[int(v), self.denominator] for v in row] for row in self.numerators]
        elif self.tag.kind == RuleKind.EXPLICIT:
            payload["nodes"] = self.points.tolist()
            payload["weights"] = self.weight_vector.tolist()
        return payload


@dataclass(frozen=True, eq=False)
class DualLatticeSet:
    generator: Rank1Generator
    box: FrequencyBox
    points: np.ndarray = field(repr=False)


def fibonacci_numbers(n: int) -> int:
    """b_0 = b_1 = 1, b_n = b_{n-1} + b_{n-2}; raises OverflowError past int64."""
    if n < 0:
        raise ValueError("Fibonacci index must be nonnegative")
    prev, cur = 1, 1
    for _ in range(n - 1):
        prev, cur = cur, prev + cur
        if cur > INT64_MAX:
            raise OverflowError(f"b_{n} does not fit into a signed 64-bit integer")
    return cur


def fibonacci_rule(n: int) -> CubatureRule:
    """b_n nodes (2pi mu / b_n, 2pi {mu b_{n-1} / b_n}), mu = 1..b_n, weights 1/b_n."""
    if n < 2:
        raise ValueError("Fibonacci rules are defined for n >= 2")
    b, b_prev = fibonacci_numbers(n), fibonacci_numbers(n - 1)
    mu = np.arange(1, b + 1, dtype=np.int64)
    numerators = np.stack([np.mod(mu, b), np.mod(mu * b_prev, b)], axis=1)
    tag = RuleTag(kind=RuleKind.FIBONACCI, m=b, n=n, generator=[1, b_prev])
    return CubatureRule(d=2, tag=tag, numerators=numerators, denominator=b,
                        generators=np.array([[1, b_prev]], dtype=np.int64))


def rank1_rule(gen: Rank1Generator) -> CubatureRule:
    """Nodes 2pi {nu z / m}, nu = 0..m-1, weights 1/m."""
    nu = np.arange(gen.m, dtype=np.int64)[:, None]
    z = np.asarray(gen.z, dtype=np.int64)[None, :]
    numerators = np.mod(nu * z, gen.m)
    tag = RuleTag(kind=RuleKind.RANK1, m=gen.m, generator=list(gen.z))
    return CubatureRule(d=gen.d, tag=tag, numerators=numerators, denominator=gen.m,
                        generators=np.asarray([gen.z], dtype=np.int64))


def tensor_grid_rule(n: int, d: int) -> CubatureRule:
    """The full product grid with n points per axis; exact for every |k_j| < n."""
    if n < 1:
        raise ValueError("grid needs at least one point per axis")
    axis = np.arange(n, dtype=np.int64)
    numerators = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    tag = RuleTag(kind=RuleKind.TENSOR_GRID, m=n ** d, grid=n)
    return CubatureRule(d=d, tag=tag, numerators=numerators, denominator=n,
                        generators=np.eye(d, dtype=np.int64))


def monte_carlo_rule(m: int, d: int, seed: int) -> CubatureRule:
    """m iid uniform nodes on [0, 2pi)^d with weights 1/m; deterministic per seed."""
    if m < 1:
        raise ValueError("Monte Carlo rules need m >= 1")
    rng = np.random.default_rng(seed)
    # uniform(0, 2pi) can round up to 2pi itself
    points = np.mod(rng.uniform(0.0, 2 * np.pi, size=(m, d)), 2 * np.pi)
    tag = RuleTag(kind=RuleKind.MONTE_CARLO, m=m, seed=seed)
    return CubatureRule(d=d, tag=tag, points=points)


def explicit_rule(points, weights=None) -> CubatureRule:
    points = np.mod(np.asarray(points, dtype=float), 2 * np.pi)
    if points.ndim != 2 or not len(points):
        raise ValueError("explicit rules need an (m, d) array of nodes")
    w = None if weights is None else np.asarray(weights, dtype=float)
    if w is not None and w.shape != (len(points),):
        raise ValueError(f"expected {len(points)} weights, got shape {w.shape}")
    tag = RuleTag(kind=RuleKind.EXPLICIT, m=len(points))
    return CubatureRule(d=points.shape[1], tag=tag, points=points, weights=w)


def rule_values(rule: CubatureRule, f: TrigPolynomial) -> np.ndarray:
    """f at every node, exact phase reduction for lattice nodes."""
    if f.d != rule.d:
        raise DimensionMismatchError(f"rule dimension {rule.d} != polynomial dimension {f.d}")
    if rule.numerators is not None:
        return evaluate_on_lattice(f, rule.numerators, rule.denominator)
    return evaluate(f, rule.points)


def weighted_sum(rule: CubatureRule, values: np.ndarray) -> complex:
    if rule.weights is None:
        return complex(np.sum(values) / rule.m)
    return complex(np.dot(rule.weights, values))


def apply_rule(rule: CubatureRule, f: TrigPolynomial) -> complex:
    """Lambda_m(f, xi) = sum_j lambda_j f(xi^j)."""
    return weighted_sum(rule, rule_values(rule, f))


def dual_indicator(rule: CubatureRule, freqs: np.ndarray) -> np.ndarray:
    """True where k is in the dual lattice, decided with integer congruences."""
    if not rule.is_lattice:
        raise NonLatticeRuleError(f"{rule.rule_id} has no dual lattice")
    freqs = np.mod(np.asarray(freqs, dtype=np.int64).reshape(-1, rule.d), rule.denominator)
    residues = np.mod(freqs @ rule.generators.T, rule.denominator)
    return np.all(residues == 0, axis=1)


def dual_lattice(gen: Rank1Generator, box: FrequencyBox) -> DualLatticeSet:
    """All k in the box with (k, z) = 0 mod m."""
    if box.d != gen.d:
        raise DimensionMismatchError(f"box dimension {box.d} != generator dimension {gen.d}")
    points = box_points(box)
    residues = np.mod(np.mod(points, gen.m) @ np.asarray(gen.z, dtype=np.int64), gen.m)
    return DualLatticeSet(generator=gen, box=box, points=points[residues == 0])


def _power_sum_1d(alpha: float, limit: int) -> float:
    """1 + 2 sum_{k=1}^{limit} k^-alpha."""
    k = np.arange(1, limit + 1, dtype=float)
    return 1.0 + 2.0 * float(np.sum(k ** (-alpha)))


def enumeration_tail(alpha: float, d: int, limit: int) -> float:
    """Certified bound on sum over k outside |k_j| <= limit of prod (k_j*)^-alpha."""
    inner = _power_sum_1d(alpha, limit)
    one_d_tail = 2.0 * limit ** (1.0 - alpha) / (alpha - 1.0)
    return (inner + one_d_tail) ** d - inner ** d


def _enumerated_sum(rule: CubatureRule, spec: ClassSpec, limit: int) -> float:
    points = box_points(FrequencyBox.tensor(spec.d, limit))
    mask = dual_indicator(rule, points) & np.any(points != 0, axis=1)
    weights = kernel_weights(spec, points[mask])
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        return math.fsum(weights ** 2)
    return math.fsum(weights)


@lru_cache(maxsize=16)
def _bernoulli_coefficients(order: int) -> np.ndarray:
    numbers = special.bernoulli(order)
    return np.array([special.comb(order, k, exact=True) * numbers[k] for k in range(order + 1)])


def periodic_zeta_kernel(x: np.ndarray, alpha: int) -> np.ndarray:
    """S(x) = 1 + sum_{k != 0} e^{2 pi i k x} / |k|^alpha for even alpha, via B_alpha({x})."""
    s = alpha // 2
    frac = np.mod(x, 1.0)
    bern = np.polyval(_bernoulli_coefficients(alpha), frac)
    return 1.0 + (-1) ** (s + 1) * (2 * np.pi) ** alpha * bern / math.factorial(alpha)


def closed_form_available(spec: ClassSpec) -> bool:
    alpha = spec.kernel_exponent
    return abs(alpha - round(alpha)) < 1e-12 and round(alpha) % 2 == 0 and round(alpha) >= 2


def _closed_form_sum(rule: CubatureRule, spec: ClassSpec):
    alpha = int(round(spec.kernel_exponent))
    products = []
    for start in range(0, rule.m, 65536):
        block = rule.numerators[start:start + 65536] / rule.denominator
        products.append(np.prod(periodic_zeta_kernel(block, alpha), axis=1))
    products = np.concatenate(products)
    total = math.fsum(products) / rule.m - 1.0
    rounding = 8 * np.finfo(float).eps * (float(np.sum(np.abs(products))) / rule.m + 1.0)
    return total, rounding


def _check_quality_inputs(rule: CubatureRule, spec: ClassSpec) -> None:
    if rule.d != spec.d:
        raise DimensionMismatchError(f"rule dimension {rule.d} != class dimension {spec.d}")
    if not rule.is_lattice or not rule.equal_weights:
        raise NonLatticeRuleError(
            f"{rule.rule_id}: the dual-lattice formula needs an equal-weight lattice rule; "
            "use box_worst_case_error for empirical estimation"
        )


def worst_case_error(rule: CubatureRule, spec: ClassSpec, precision: int = 64,
                     method: str = "auto") -> KappaInterval:
    """
    Worst-case integration error of an equal-weight lattice rule over the unit ball.

    W^r_2: sqrt(sum_{k in dual, k != 0} F(k)^2); E^r: sum_{k in dual, k != 0} F(k).
    "enumeration" sums the dual points with |k_j| <= precision and adds a certified
    tail; "closed_form" uses Bernoulli polynomials and needs an even exponent
    (2r for W^r_2, r for E^r); "auto" prefers the closed form.
    """
    _check_quality_inputs(rule, spec)
    if method == "auto":
        method = "closed_form" if closed_form_available(spec) else "enumeration"
    if method == "closed_form":
        if not closed_form_available(spec):
            raise InvalidClassError(f"no Bernoulli closed form for exponent {spec.kernel_exponent}")
        total, rounding = _closed_form_sum(rule, spec)
        lo, hi = max(total - rounding, 0.0), max(total + rounding, 0.0)
        tail = 0.0
        limit = None
    elif method == "enumeration":
        lo = _enumerated_sum(rule, spec, precision)
        tail = enumeration_tail(spec.kernel_exponent, spec.d, precision)
        hi = lo + tail
        limit = precision
    else:
        raise ValueError(f"unknown method '{method}'")
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        lo, hi = math.sqrt(lo), math.sqrt(hi)
    return KappaInterval(lo=lo, hi=hi, method=method, enumeration_limit=limit, tail=tail)


def box_worst_case_error(rule: CubatureRule, spec: ClassSpec, box: FrequencyBox) -> float:
    """
    Exact worst-case integration error over the unit ball restricted to the box, for any rule.

    W^r_2: sqrt(sum_k F(k)^2 |I(e_k) - Lambda(e_k)|^2); E^r: sum_k F(k) |I(e_k) - Lambda(e_k)|.
    """
    if rule.d != spec.d or box.d != spec.d:
        raise DimensionMismatchError("rule, class and box dimensions must agree")
    points = box_points(box)
    errors = np.empty(len(points))
    weights = rule.weight_vector
    for start in range(0, len(points), _CHUNK):
        block = points[start:start + _CHUNK]
        if rule.numerators is not None:
            idx = np.mod(np.mod(rule.numerators, rule.denominator) @ np.mod(block, rule.denominator).T,
                         rule.denominator)
            responses = weights @ np.exp(2j * np.pi * idx / rule.denominator)
        else:
            responses = weights @ np.exp(1j * (rule.points @ block.T.astype(float)))
        exact = np.all(block == 0, axis=1).astype(float)
        errors[start:start + _CHUNK] = np.abs(exact - responses)
    kernel = kernel_weights(spec, points)
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        return float(np.sqrt(np.sum((kernel * errors) ** 2)))
    return float(np.sum(kernel * errors))


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    return all(m % p for p in range(3, math.isqrt(m) + 1, 2))


def korobov_generator(m: int, a: int, d: int) -> Rank1Generator:
    """z = (1, a, a^2, ..., a^{d-1}) mod m."""
    return Rank1Generator(m=m, z=[pow(a, j, m) for j in range(d)])


def korobov_search(m: int, spec: ClassSpec, precision: int = 32, method: str = "auto",
                   max_workers: Optional[int] = None) -> Rank1Generator:
    """
    Exhaustive search over a in 1..m-1 minimizing the class worst-case error.

    Candidates are scored in parallel; the reduction is min by (quality, a) so the
    result does not depend on scheduling.
    """
    if not is_prime(m):
        raise NotPrimeError(f"Korobov search needs a prime modulus, got {m}")
    if spec.d < 2:
        raise InvalidClassError("Korobov search needs d >= 2")

    def score(a: int):
        gen = korobov_generator(m, a, spec.d)
        quality = worst_case_error(rank1_rule(gen), spec, precision=precision, method=method).hi
        logger.debug(f"korobov m={m} a={a}: quality {quality:.6g}")
        return quality, a

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        scores = list(pool.map(score, range(1, m)))
    quality, best = min(scores)
    logger.info(f"korobov search m={m} for {spec.class_id}: a={best}, quality {quality:.6g}")
    return korobov_generator(m, best, spec.d)
