"""
Discretization errors of L_q norms on cubature nodes.

The signed defect ||f||_q^q - sum_j lambda_j |f(xi^j)|^q is the primitive; both
terms are exact for trigonometric polynomials (the norm through convolution
powers, the sum through direct evaluation).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatchError, DiscretizationError, EmptyBoxError, MissingConstantError, NonLatticeRuleError,
)
from .fourier_core import (
    TrigPolynomial, box_points, check_even_exponent, kernel_weights, lq_norm_q, random_unit_ball_sample,
)
from .lattice_cubature import (
    CubatureRule, box_worst_case_error, dual_indicator, rule_values, weighted_sum, worst_case_error,
)
from .models import ClassKind, ClassSpec, DefectRecord, DiscretizationBound, FrequencyBox, KappaInterval
from .report_storage import ReportStorage

logger = logging.getLogger(__name__)

DEFECT_CSV_HEADER = ["rule_id", "class", "q", "m", "signed_defect", "er_abs"]


def signed_defect(f: TrigPolynomial, rule: CubatureRule, q: int = 2) -> float:
    """||f||_q^q - sum_j lambda_j |f(xi^j)|^q."""
    q = check_even_exponent(q)
    if f.d != rule.d:
        raise DimensionMismatchError(f"polynomial dimension {f.d} != rule dimension {rule.d}")
    values = np.abs(rule_values(rule, f)) ** q
    return lq_norm_q(f, q) - weighted_sum(rule, values).real


def er_abs(f: TrigPolynomial, rule: CubatureRule, q: int = 2) -> float:
    return abs(signed_defect(f, rule, q))


def defect_record(f: TrigPolynomial, rule: CubatureRule, spec: ClassSpec, q: int = 2,
                  f_id: str = "f") -> DefectRecord:
    defect = signed_defect(f, rule, q)
    return DefectRecord(f_id=f_id, q=q, signed_defect=defect, er_abs=abs(defect),
                        rule_id=rule.rule_id, class_id=spec.class_id, m=rule.m)


def defect_batch(fs: Sequence[TrigPolynomial], rule: CubatureRule, spec: ClassSpec, q: int = 2,
                 f_ids: Optional[Sequence[str]] = None) -> List[DefectRecord]:
    if f_ids is None:
        f_ids = [f"f{i}" for i in range(len(fs))]
    if len(f_ids) != len(fs):
        raise DiscretizationError(f"{len(f_ids)} ids for {len(fs)} polynomials")
    return [defect_record(f, rule, spec, q, f_id) for f, f_id in zip(fs, f_ids)]


def write_defect_batch(records: Sequence[DefectRecord], storage: ReportStorage, name: str) -> bool:
    """One CSV row per record: rule_id, class, q, m, signed_defect, er_abs."""
    logger.info(f"Writing {len(records)} defect records to {name}")
    return storage.write_csv(name, DEFECT_CSV_HEADER, [record.csv_row() for record in records])


def discretization_bound(rule: CubatureRule, spec: ClassSpec, q: int = 2, precision: int = 64,
                         method: str = "auto", box: Optional[FrequencyBox] = None) -> DiscretizationBound:
    """
    a^{q-1} * kappa.hi with a = spec.quasi_algebra_constant.

    |f|^q is a product of q unit-ball factors, so it lies in the a^{q-1} ball and
    its integration error is at most a^{q-1} times the worst-case error. This
    holds for every unit-ball f whose products stay inside the n_range the
    constant was computed on, provided a bounds that constant from above
    (QuasiAlgebraReport.constant_upper); the truncated value alone is only an
    estimate.

    When box is given, kappa is the box-restricted error over the support of
    |f|^q; this is the only option for rules without lattice structure.
    """
    q = check_even_exponent(q)
    if spec.quasi_algebra_constant is None:
        raise MissingConstantError(
            f"no quasi-algebra constant for {spec.class_id}; run quasi_algebra_constant first "
            "and attach it with ClassSpec.with_quasi_algebra_constant"
        )
    if box is None:
        if not rule.is_lattice:
            raise NonLatticeRuleError(f"{rule.rule_id}: pass the support box of |f|^q for this rule")
        kappa = worst_case_error(rule, spec, precision=precision, method=method)
    else:
        value = box_worst_case_error(rule, spec, box)
        kappa = KappaInterval(lo=value, hi=value, method="box", enumeration_limit=box.extent)
    a = spec.quasi_algebra_constant
    return DiscretizationBound(value=a ** (q - 1) * kappa.hi, quasi_algebra_constant=a,
                               chain_power=q - 1, kappa=kappa, q=q)


def best_dual_frequency(rule: CubatureRule, spec: ClassSpec, box_limit: int) -> Optional[np.ndarray]:
    """Nonzero dual point with the largest kernel value in |k_j| <= box_limit, first in lex order on ties."""
    points = box_points(FrequencyBox.tensor(spec.d, box_limit))
    mask = dual_indicator(rule, points) & np.any(points != 0, axis=1)
    candidates = points[mask]
    if not len(candidates):
        return None
    weights = kernel_weights(spec, candidates)
    return candidates[int(np.argmax(weights))]


def two_term_witness(rule: CubatureRule, spec: ClassSpec, q: int = 2,
                     box_limit: int = 8) -> Tuple[TrigPolynomial, float]:
    """
    A unit-ball function the lattice rule misintegrates as badly as its best aliased frequency.

    W^r_2: f_hat(0) = 1/sqrt(2), f_hat(k*) = F(k*)/sqrt(2), giving er = F(k*) at q=2.
    E^r: f = 1 + F(k*) e^{i(k*,x)}, giving er = 2 F(k*) at q=2.
    """
    if rule.d != spec.d:
        raise DimensionMismatchError(f"rule dimension {rule.d} != class dimension {spec.d}")
    if not rule.is_lattice:
        raise NonLatticeRuleError(f"{rule.rule_id} has no dual lattice to alias against")
    k_star = best_dual_frequency(rule, spec, box_limit)
    if k_star is None:
        raise EmptyBoxError(f"{rule.rule_id} has no nonzero dual point with |k_j| <= {box_limit}")
    weight = float(kernel_weights(spec, k_star)[0])
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        coeffs = [1 / math.sqrt(2), weight / math.sqrt(2)]
    else:
        coeffs = [1.0, weight]
    f = TrigPolynomial.from_arrays(spec.d, [np.zeros(spec.d, dtype=np.int64), k_star], coeffs)
    return f, er_abs(f, rule, q)


def empirical_sup_er(rule: CubatureRule, spec: ClassSpec, q: int = 2, n_samples: int = 100,
                     seed: int = 0, box: Optional[FrequencyBox] = None,
                     witness_box_limit: Optional[int] = None) -> float:
    """
    Largest er over seeded unit-ball samples and the two-term witness.

    Sample i is drawn from SeedSequence([seed, i]), so more samples never lower
    the value. A lower bound on the supremum over the class.
    """
    box = box or FrequencyBox.tensor(spec.d, 3)
    witness_box_limit = box.extent if witness_box_limit is None else witness_box_limit
    best = 0.0
    if rule.is_lattice:
        try:
            best = two_term_witness(rule, spec, q, box_limit=witness_box_limit)[1]
        except EmptyBoxError:
            logger.debug(f"{rule.rule_id}: no witness within |k_j| <= {witness_box_limit}")

    def sample_er(i: int) -> float:
        f = random_unit_ball_sample(spec, box, np.random.SeedSequence([seed, i]))
        return er_abs(f, rule, q)

    if n_samples:
        with ThreadPoolExecutor() as pool:
            best = max(best, max(pool.map(sample_er, range(n_samples))))
    return best
