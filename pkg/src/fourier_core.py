"""
Exact arithmetic on multivariate trigonometric polynomials on the torus [0, 2pi)^d
and the Fourier-side description of the classes W^r_2 and E^r.

The measure is Lebesgue measure divided by (2pi)^d, so the integral of f is its
zeroth coefficient and ||f||_2^2 is the sum of squared coefficient moduli.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal

from .errors import DimensionMismatchError, EmptyBoxError, UnsupportedExponentError
from .models import BoxKind, ClassKind, ClassSpec, FrequencyBox, QuasiAlgebraReport
from .settings import get_settings

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]

# dense convolution is used while the output grid stays below this many cells
_DENSE_CELL_LIMIT = 4_000_000
_DIRECT_WORK_LIMIT = 4_000_000
_EVAL_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    """Sparse coefficient map k -> f_hat(k); frequencies sorted lexicographically, unique."""
    d: int
    freqs: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.freqs.setflags(write=False)
        self.coeffs.setflags(write=False)

    @classmethod
    def from_arrays(cls, d: int, freqs, coeffs) -> "TrigPolynomial":
        freqs = np.asarray(freqs, dtype=np.int64).reshape(-1, d)
        coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
        if len(freqs) != len(coeffs):
            raise ValueError(f"{len(freqs)} frequencies but {len(coeffs)} coefficients")
        if len(freqs) == 0:
            return cls(d, np.zeros((0, d), dtype=np.int64), np.zeros(0, dtype=np.complex128))
        unique, inverse = np.unique(freqs, axis=0, return_inverse=True)
        summed = np.zeros(len(unique), dtype=np.complex128)
        np.add.at(summed, inverse.reshape(-1), coeffs)
        return cls(d, unique, summed)

    @classmethod
    def from_mapping(cls, d: int, mapping: Dict[Sequence[int], complex]) -> "TrigPolynomial":
        for k in mapping:
            if len(k) != d:
                raise DimensionMismatchError(f"frequency {tuple(k)} is not {d}-dimensional")
        return cls.from_arrays(d, list(mapping.keys()) or np.zeros((0, d)), list(mapping.values()))

    @classmethod
    def constant(cls, d: int, c: complex = 1.0) -> "TrigPolynomial":
        return cls.from_arrays(d, np.zeros((1, d)), [c])

    @classmethod
    def monomial(cls, k: Sequence[int], c: complex = 1.0) -> "TrigPolynomial":
        """c * e^{i(k,x)}."""
        return cls.from_arrays(len(k), [list(k)], [c])

    @classmethod
    def zero(cls, d: int) -> "TrigPolynomial":
        return cls.from_arrays(d, np.zeros((0, d)), [])

    @cached_property
    def _index(self) -> Dict[MultiIndex, int]:
        return {tuple(int(v) for v in k): i for i, k in enumerate(self.freqs)}

    def coefficient(self, k: Sequence[int]) -> complex:
        i = self._index.get(tuple(int(v) for v in k))
        return complex(self.coeffs[i]) if i is not None else 0j

    @property
    def mean(self) -> complex:
        """Integral against the normalized measure."""
        return self.coefficient((0,) * self.d)

    @property
    def size(self) -> int:
        return len(self.coeffs)

    def is_real_within(self, tol: float) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs)))) if self.size else 1.0
        return max_abs_coefficient(self - conjugate(self)) <= tol * scale

    @property
    def is_real(self) -> bool:
        """Conjugate symmetry f_hat(-k) = conj(f_hat(k))."""
        return self.is_real_within(get_settings().abs_tol)

    def to_mapping(self) -> Dict[MultiIndex, complex]:
        return {k: complex(self.coeffs[i]) for k, i in self._index.items()}

    def scale(self, c: complex) -> "TrigPolynomial":
        return TrigPolynomial(self.d, self.freqs.copy(), self.coeffs * c)

    def _coerce(self, other) -> "TrigPolynomial":
        if isinstance(other, TrigPolynomial):
            if other.d != self.d:
                raise DimensionMismatchError(f"dimensions {self.d} and {other.d} differ")
            return other
        return TrigPolynomial.constant(self.d, complex(other))

    def __add__(self, other) -> "TrigPolynomial":
        other = self._coerce(other)
        return TrigPolynomial.from_arrays(
            self.d, np.concatenate([self.freqs, other.freqs]), np.concatenate([self.coeffs, other.coeffs])
        )

    __radd__ = __add__

    def __neg__(self) -> "TrigPolynomial":
        return self.scale(-1.0)

    def __sub__(self, other) -> "TrigPolynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "TrigPolynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "TrigPolynomial":
        if isinstance(other, TrigPolynomial):
            return pointwise_product(self, other)
        return self.scale(complex(other))

    __rmul__ = __mul__

    def to_payload(self) -> Dict[str, object]:
        rows = [[int(v) for v in k] + [float(c.real), float(c.imag)] for k, c in zip(self.freqs, self.coeffs)]
        return {"d": self.d, "coeffs": rows}

    @classmethod
    def from_payload(cls, payload: Dict[str, object]) -> "TrigPolynomial":
        d = int(payload["d"])
        rows = payload["coeffs"]
        freqs = [[int(v) for v in row[:d]] for row in rows]
        coeffs = [complex(row[d], row[d + 1]) for row in rows]
        return cls.from_arrays(d, freqs or np.zeros((0, d)), coeffs)


def max_abs_coefficient(f: TrigPolynomial) -> float:
    return float(np.max(np.abs(f.coeffs))) if f.size else 0.0


def _check_dimension(d: int, k: Sequence[int]) -> None:
    if len(k) != d:
        raise DimensionMismatchError(f"expected a {d}-dimensional index, got {len(k)} components")


def kstar(k):
    """k* = max(|k|, 1), elementwise."""
    return np.maximum(np.abs(np.asarray(k, dtype=np.int64)), 1)


def kernel_coeff(spec: ClassSpec, k: Sequence[int]) -> float:
    """F_r_hat(k) = prod_j (k_j*)^(-r)."""
    _check_dimension(spec.d, k)
    return math.prod(float(max(abs(int(kj)), 1)) ** (-spec.r) for kj in k)


def kernel_weights(spec: ClassSpec, freqs: np.ndarray) -> np.ndarray:
    """Vectorized kernel_coeff over the rows of freqs."""
    freqs = np.asarray(freqs, dtype=np.int64).reshape(-1, spec.d)
    return np.prod(kstar(freqs).astype(float) ** (-spec.r), axis=1)


def evaluate(f: TrigPolynomial, x) -> Union[complex, np.ndarray]:
    """sum_k f_hat(k) e^{i(k,x)} at one point or at every row of an (n, d) array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    points = x.reshape(-1, f.d) if not single else x.reshape(1, -1)
    if points.shape[1] != f.d:
        raise DimensionMismatchError(f"point dimension {points.shape[1]} != polynomial dimension {f.d}")
    out = np.zeros(len(points), dtype=np.complex128)
    if f.size:
        freqs = f.freqs.astype(float)
        for start in range(0, len(points), _EVAL_CHUNK):
            block = points[start:start + _EVAL_CHUNK]
            out[start:start + _EVAL_CHUNK] = np.exp(1j * (block @ freqs.T)) @ f.coeffs
    return complex(out[0]) if single else out


def evaluate_on_lattice(f: TrigPolynomial, numerators: np.ndarray, denominator: int) -> np.ndarray:
    """Evaluate at nodes 2pi * numerators / denominator with exact integer phase reduction."""
    numerators = np.asarray(numerators, dtype=np.int64).reshape(-1, f.d)
    if f.d * denominator * denominator >= 2 ** 62:
        raise OverflowError(f"phase products overflow int64 for denominator {denominator}")
    out = np.zeros(len(numerators), dtype=np.complex128)
    if not f.size:
        return out
    reduced = np.mod(f.freqs, denominator)
    for start in range(0, len(numerators), _EVAL_CHUNK):
        block = np.mod(numerators[start:start + _EVAL_CHUNK], denominator)
        idx = np.mod(block @ reduced.T, denominator)
        out[start:start + _EVAL_CHUNK] = np.exp(2j * np.pi * idx / denominator) @ f.coeffs
    return out


def l2_norm_sq(f: TrigPolynomial) -> float:
    """Parseval: ||f||_2^2 = sum_k |f_hat(k)|^2."""
    return float(np.sum(np.abs(f.coeffs) ** 2))


def sup_norm_bound(f: TrigPolynomial) -> float:
    """Certified ||f||_inf <= sum_k |f_hat(k)|."""
    return float(np.sum(np.abs(f.coeffs)))


def class_norm(f: TrigPolynomial, spec: ClassSpec) -> float:
    """W^r_2 norm ||phi||_2, or the E^r membership ratio max |f_hat(k)| / F_hat(k)."""
    if f.d != spec.d:
        raise DimensionMismatchError(f"polynomial dimension {f.d} != class dimension {spec.d}")
    if not f.size:
        return 0.0
    ratio = np.abs(f.coeffs) / kernel_weights(spec, f.freqs)
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        return float(np.sqrt(np.sum(ratio ** 2)))
    return float(np.max(ratio))


def conjugate(f: TrigPolynomial) -> TrigPolynomial:
    """Coefficients of the complex conjugate function: conj(f_hat(-k))."""
    return TrigPolynomial(f.d, (-f.freqs)[::-1].copy(), np.conj(f.coeffs)[::-1].copy())


def _dense(f: TrigPolynomial) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = f.freqs.min(axis=0)
    shape = tuple(int(v) for v in f.freqs.max(axis=0) - lo + 1)
    values = np.zeros(shape, dtype=np.complex128)
    mask = np.zeros(shape, dtype=float)
    index = tuple((f.freqs - lo).T)
    values[index] = f.coeffs
    mask[index] = 1.0
    return lo, values, mask


def _convolve_dense(f: TrigPolynomial, g: TrigPolynomial) -> TrigPolynomial:
    lo_f, a, mask_a = _dense(f)
    lo_g, b, mask_b = _dense(g)
    method = "direct" if a.size * b.size <= _DIRECT_WORK_LIMIT else "fft"
    values = signal.convolve(a, b, method=method)
    support = signal.convolve(mask_a, mask_b, method=method) > 0.5
    freqs = np.argwhere(support) + lo_f + lo_g
    return TrigPolynomial(f.d, freqs.astype(np.int64), values[support].astype(np.complex128))


def _convolve_sparse(f: TrigPolynomial, g: TrigPolynomial) -> TrigPolynomial:
    small, large = (f, g) if f.size <= g.size else (g, f)
    freqs = (small.freqs[:, None, :] + large.freqs[None, :, :]).reshape(-1, f.d)
    coeffs = (small.coeffs[:, None] * large.coeffs[None, :]).reshape(-1)
    return TrigPolynomial.from_arrays(f.d, freqs, coeffs)


def pointwise_product(f: TrigPolynomial, g: TrigPolynomial) -> TrigPolynomial:
    """Full convolution of coefficient maps; the support is the Minkowski sum of supports."""
    if f.d != g.d:
        raise DimensionMismatchError(f"dimensions {f.d} and {g.d} differ")
    if not f.size or not g.size:
        return TrigPolynomial.zero(f.d)
    extent = (f.freqs.max(axis=0) - f.freqs.min(axis=0)) + (g.freqs.max(axis=0) - g.freqs.min(axis=0)) + 1
    if float(np.prod(extent.astype(float))) <= _DENSE_CELL_LIMIT:
        return _convolve_dense(f, g)
    return _convolve_sparse(f, g)


def power(f: TrigPolynomial, n: int) -> TrigPolynomial:
    """f^n by repeated squaring."""
    if n < 0:
        raise ValueError("negative powers are not polynomials")
    result = TrigPolynomial.constant(f.d, 1.0)
    base = f
    while n:
        if n & 1:
            result = pointwise_product(result, base)
        n >>= 1
        if n:
            base = pointwise_product(base, base)
    return result


def inner_product(f: TrigPolynomial, g: TrigPolynomial) -> complex:
    """sum_k f_hat(k) conj(g_hat(k)), the L_2 inner product."""
    if not f.size or not g.size:
        return 0j
    both = np.concatenate([f.freqs, g.freqs])
    _, inverse = np.unique(both, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    slots = np.full(inverse.max() + 1, -1, dtype=np.int64)
    slots[inverse[f.size:]] = np.arange(g.size)
    matched = slots[inverse[:f.size]]
    keep = matched >= 0
    return complex(np.sum(f.coeffs[keep] * np.conj(g.coeffs[matched[keep]])))


def check_even_exponent(q) -> int:
    if isinstance(q, bool) or int(q) != q or q <= 0 or int(q) % 2:
        raise UnsupportedExponentError(f"q must be an even positive integer, got {q}")
    return int(q)


def lq_norm_q(f: TrigPolynomial, q: int) -> float:
    """||f||_q^q = h_hat(0) for h = (f conj(f))^(q/2), computed by convolution."""
    q = check_even_exponent(q)
    s = q // 2
    if s == 1:
        return l2_norm_sq(f)
    modulus_sq = pointwise_product(f, conjugate(f))
    half = power(modulus_sq, s // 2)
    if s % 2 == 0:
        return l2_norm_sq(half)
    # h_hat(0) = <half, half * |f|^2>; both factors are real-valued
    return float(inner_product(half, pointwise_product(half, modulus_sq)).real)


def box_points(box: FrequencyBox) -> np.ndarray:
    """All frequencies of the box as an (n, d) array in lexicographic order."""
    if box.kind == BoxKind.TENSOR:
        axis = np.arange(-box.extent, box.extent + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * box.d), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, box.d)
    prefixes: List[Tuple[Tuple[int, ...], int]] = [((), 1)]
    for _ in range(box.d):
        extended = []
        for prefix, prod in prefixes:
            kmax = int(box.limit // prod)
            for k in range(-kmax, kmax + 1):
                new_prod = prod * max(abs(k), 1)
                if new_prod <= box.limit:
                    extended.append((prefix + (k,), new_prod))
        prefixes = extended
    return np.array([p for p, _ in prefixes], dtype=np.int64).reshape(-1, box.d)


@lru_cache(maxsize=4096)
def _ratio_terms_1d(kind: ClassKind, r: float, n: int, limit: int) -> Tuple[float, float]:
    """Truncated 1D sum over |k| <= limit and a certified bound on the rest."""
    k = np.arange(-limit, limit + 1, dtype=np.int64)
    a = kstar(k).astype(float) ** (-r)
    b = kstar(n - k).astype(float) ** (-r)
    if kind == ClassKind.SOBOLEV_MIXED:
        total = float(np.sum((a * b) ** 2))
        if limit >= 2 * abs(n):
            tail = 2 * 4.0 ** r * limit ** (1 - 4 * r) / (4 * r - 1)
        else:
            tail = 2 * limit ** (1 - 2 * r) / (2 * r - 1)
    else:
        total = float(np.sum(a * b))
        if limit >= 2 * abs(n):
            tail = 2 * 2.0 ** r * limit ** (1 - 2 * r) / (2 * r - 1)
        else:
            tail = 2 * limit ** (1 - r) / (r - 1)
    return total, tail


def _ratio_from_sum(spec: ClassSpec, total: float, weight: float) -> float:
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        return math.sqrt(total) / weight
    return total / weight


def _ratio_pair(spec: ClassSpec, n: Sequence[int], box: FrequencyBox) -> Tuple[float, float, float]:
    """(truncated ratio, ratio with tail, tail) at frequency n."""
    weight = kernel_coeff(spec, n)
    limit = max(box.extent, 1)
    one_d = [_ratio_terms_1d(spec.kind, spec.r, int(nj), limit) for nj in n]
    full_upper = math.prod(s + t for s, t in one_d)
    if box.kind == BoxKind.TENSOR:
        truncated = math.prod(s for s, _ in one_d)
        value = math.prod(_ratio_from_sum(spec, s, float(max(abs(int(nj)), 1)) ** (-spec.r))
                          for (s, _), nj in zip(one_d, n))
    else:
        points = box_points(box)
        a = kernel_weights(spec, points)
        b = kernel_weights(spec, np.asarray(n, dtype=np.int64)[None, :] - points)
        truncated = float(np.sum((a * b) ** 2)) if spec.kind == ClassKind.SOBOLEV_MIXED else float(np.sum(a * b))
        value = _ratio_from_sum(spec, truncated, weight)
    tail = max(full_upper - truncated, 0.0)
    return value, _ratio_from_sum(spec, truncated + tail, weight), tail


def quasi_algebra_ratio(spec: ClassSpec, n: Sequence[int], box: FrequencyBox) -> float:
    """
    Truncated quasi-algebra ratio at frequency n.

    W^r_2: sqrt(sum_{k in box} |F(k) F(n-k)|^2) / F(n); E^r: sum_{k in box} F(k) F(n-k) / F(n).
    Grows with the box towards the optimal constant at n.
    """
    _check_dimension(spec.d, n)
    if box.d != spec.d:
        raise DimensionMismatchError(f"box dimension {box.d} != class dimension {spec.d}")
    return _ratio_pair(spec, n, box)[0]


def quasi_algebra_constant(spec: ClassSpec, n_range: Union[int, Iterable[Sequence[int]]],
                           box: FrequencyBox) -> QuasiAlgebraReport:
    """
    Max of quasi_algebra_ratio over n_range (an int N means the tensor range |n_j| <= N).

    The constant is valid for products of functions supported in the box whose
    product is supported in n_range.
    """
    if box.d != spec.d:
        raise DimensionMismatchError(f"box dimension {box.d} != class dimension {spec.d}")
    if isinstance(n_range, int) and box.kind == BoxKind.TENSOR:
        line = spec.model_copy(update={"d": 1})
        line_box = FrequencyBox.tensor(1, box.extent)
        ratios = [(_ratio_pair(line, [n], line_box), n) for n in range(-n_range, n_range + 1)]
        (value, _, _), n_best = max(ratios, key=lambda item: (item[0][0], -abs(item[1]), -item[1]))
        upper_1d = max(item[0][1] for item in ratios)
        argmax = [n_best] * spec.d
        constant, upper = value ** spec.d, upper_1d ** spec.d
        tail = _ratio_pair(spec, argmax, box)[2]
        limit = n_range
    else:
        if isinstance(n_range, int):
            candidates = box_points(FrequencyBox.tensor(spec.d, n_range))
            limit = n_range
        else:
            candidates = np.asarray([list(n) for n in n_range], dtype=np.int64).reshape(-1, spec.d)
            limit = int(np.max(np.abs(candidates))) if len(candidates) else 0
        if not len(candidates):
            raise EmptyBoxError("n_range is empty")
        best = None
        upper = 0.0
        for n in candidates:
            value, value_upper, tail_n = _ratio_pair(spec, [int(v) for v in n], box)
            upper = max(upper, value_upper)
            if best is None or value > best[0]:
                best = (value, [int(v) for v in n], tail_n)
        constant, argmax, tail = best
    logger.debug(f"quasi-algebra constant for {spec.class_id}: {constant:.6g} at n={argmax}")
    return QuasiAlgebraReport(kind=spec.kind, r=spec.r, d=spec.d, constant=constant,
                              constant_upper=upper, argmax=argmax, n_limit=limit,
                              box_limit=box.extent, tail_bound=tail)


def random_unit_ball_sample(spec: ClassSpec, box: FrequencyBox, seed=None,
                            real_valued: bool = False) -> TrigPolynomial:
    """
    Random f = F_r * phi with phi drawn on the box and normalized so class_norm(f) = 1.

    seed may be an int, a SeedSequence or a Generator; equal seeds give equal maps.
    """
    if box.d != spec.d:
        raise DimensionMismatchError(f"box dimension {box.d} != class dimension {spec.d}")
    points = box_points(box)
    if not len(points):
        raise EmptyBoxError("cannot sample on an empty box")
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(len(points)) + 1j * rng.standard_normal(len(points))
    if real_valued:
        # the box is symmetric and sorted, so -points[i] sits at index n-1-i
        phi = 0.5 * (phi + np.conj(phi[::-1]))
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        phi = phi / np.sqrt(np.sum(np.abs(phi) ** 2))
    else:
        phi = phi / np.max(np.abs(phi))
    return TrigPolynomial(spec.d, points.copy(), kernel_weights(spec, points) * phi)
