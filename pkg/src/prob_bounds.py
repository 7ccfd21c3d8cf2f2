"""
Concentration and entropy bound calculators, with Monte Carlo experiments that exercise them.

Every probability bound is reported raw and clamped to [0, 1]. Constants that
only exist up to an unspecified factor are explicit parameters with default 1.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DiscretizationError, InvalidClassError, SequenceTooShortError
from .fourier_core import (
    TrigPolynomial, evaluate, evaluate_on_lattice, l2_norm_sq, random_unit_ball_sample, sup_norm_bound,
)
from .lattice_cubature import monte_carlo_rule, tensor_grid_rule
from .discretization import er_abs
from .models import (
    Bt3Report, ClassSpec, EmpiricalMseReport, EntropyForm, EntropySequence, FrequencyBox, McMseReport,
    RandomDesignReport, RandomDesignRow, RateModel, TailBoundReport, TailKind,
)

logger = logging.getLogger(__name__)

# one-sided 99% normal quantile for the empirical tail test
Z_99 = 2.326
_MAX_DYADIC_LEVEL = 4096


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise DiscretizationError(f"{name} must be positive, got {value}")


def _least_integer_at_least(x: float) -> int:
    """Smallest m >= 1 with m >= x, forgiving relative rounding of 1e-12 in x."""
    return max(1, math.ceil(x - 1e-12 * abs(x)))


def mc_mse(f: TrigPolynomial, m: int) -> McMseReport:
    """Exact E|I(f) - Lambda_m(f)|^2 = (||f||_2^2 - |I(f)|^2)/m over iid uniform nodes."""
    if m < 1:
        raise DiscretizationError(f"m must be >= 1, got {m}")
    norm_sq = l2_norm_sq(f)
    exact = max(norm_sq - abs(f.mean) ** 2, 0.0) / m
    return McMseReport(m=m, exact=exact, bound=norm_sq / m)


def empirical_mc_mse(f: TrigPolynomial, m: int, n_draws: int = 1000, seed: int = 0) -> EmpiricalMseReport:
    """Mean squared Monte Carlo error over n_draws seeded node sets, with its standard error."""
    if n_draws < 2:
        raise DiscretizationError("need at least two draws for a standard error")
    rng = np.random.default_rng(seed)
    errors = np.empty(n_draws)
    for t in range(n_draws):
        nodes = rng.uniform(0.0, 2 * np.pi, size=(m, f.d))
        errors[t] = abs(f.mean - np.mean(evaluate(f, nodes))) ** 2
    return EmpiricalMseReport(m=m, n_draws=n_draws, mean=float(np.mean(errors)),
                              standard_error=float(np.std(errors, ddof=1) / math.sqrt(n_draws)))


def hoeffding_tail(m: int, eta: float, M: float) -> TailBoundReport:
    """P(|I - Lambda_m| >= eta) <= 2 exp(-m eta^2 / (8 M^2)) for |g| <= M."""
    _check_positive(m=m, eta=eta, M=M)
    raw = 2.0 * math.exp(-m * eta ** 2 / (8.0 * M ** 2))
    return TailBoundReport(kind=TailKind.HOEFFDING, m=m, eta=eta, parameters={"M": M},
                           raw=raw, bound=min(raw, 1.0))


def bernstein_tail(m: int, eta: float, M2: float, Minf: float) -> TailBoundReport:
    _check_positive(m=m, eta=eta, M2=M2, Minf=Minf)
    raw = 2.0 * math.exp(-m * eta ** 2 / (2.0 * (M2 ** 2 + 2.0 * Minf * eta / 3.0)))
    return TailBoundReport(kind=TailKind.BERNSTEIN, m=m, eta=eta, parameters={"M2": M2, "Minf": Minf},
                           raw=raw, bound=min(raw, 1.0))


def finite_class_success(m: int, eta: float, M: float, cardinality: int) -> TailBoundReport:
    """
    Lower bound 1 - 2 N exp(-m eta^2 / (8 M^2)) on the probability that m random
    nodes integrate all N functions of a finite class within eta.

    minimal_m is the least m making the bound positive.
    """
    _check_positive(m=m, eta=eta, M=M, cardinality=cardinality)
    raw = 1.0 - 2.0 * cardinality * math.exp(-m * eta ** 2 / (8.0 * M ** 2))
    minimal_m = math.floor(8.0 * M ** 2 * math.log(2.0 * cardinality) / eta ** 2) + 1
    return TailBoundReport(kind=TailKind.UNION, m=m, eta=eta,
                           parameters={"M": M, "cardinality": float(cardinality)},
                           raw=raw, bound=min(max(raw, 0.0), 1.0), minimal_m=minimal_m)


def bt1_success(m: int, eps: float, M: float, sigma2: float, covering_number: int) -> TailBoundReport:
    """
    Variance-aware success bound 1 - 2 N exp(-m eps^2 / (8 (sigma^2 + M^2 eps / 6))).

    N is the covering number of the class at radius eps/(8M) and sigma^2 its
    variance; both come from the caller.
    """
    _check_positive(m=m, eps=eps, M=M, covering_number=covering_number)
    if sigma2 < 0:
        raise DiscretizationError(f"sigma2 must be nonnegative, got {sigma2}")
    raw = 1.0 - 2.0 * covering_number * math.exp(-m * eps ** 2 / (8.0 * (sigma2 + M ** 2 * eps / 6.0)))
    return TailBoundReport(kind=TailKind.BT1, m=m, eta=eps,
                           parameters={"M": M, "sigma2": sigma2, "covering_number": float(covering_number)},
                           raw=raw, bound=min(max(raw, 0.0), 1.0))


def bt3_quantities(seq: EntropySequence, eta: float) -> Bt3Report:
    """
    J: least j >= 0 with eps_{2^j} <= eta / (8M).
    S_J = sum_{j=1}^J 2^{(j+1)/2} eps_{2^{j-1}}; required m: least m with m (eta / S_J)^2 >= 480 M^2.
    """
    _check_positive(eta=eta)
    threshold = eta / (8.0 * seq.M)
    J = 0
    while True:
        if seq.available is not None and 2 ** J > seq.available:
            raise SequenceTooShortError(
                f"entropy list of length {seq.available} ends before eps_(2^j) <= {threshold:.6g}"
            )
        if seq.value_at_power_of_two(J) <= threshold:
            break
        J += 1
        if J > _MAX_DYADIC_LEVEL:
            raise SequenceTooShortError(f"eps_(2^j) stays above {threshold:.6g} up to j={_MAX_DYADIC_LEVEL}")
    S_J = math.fsum(2.0 ** ((j + 1) / 2) * seq.value_at_power_of_two(j - 1) for j in range(1, J + 1))
    required = _least_integer_at_least(480.0 * seq.M ** 2 * (S_J / eta) ** 2)
    return Bt3Report(J=J, S_J=S_J, required_m=required, threshold=threshold, M=seq.M)


def bc1_required_m(eta: float, M: float = 1.0, constant_C1: float = 1.0) -> int:
    """Least m with m (eta / (1 + log(M/eta)))^2 >= C1, for entropy numbers decaying like n^{-1/2}."""
    _check_positive(eta=eta, M=M, constant_C1=constant_C1)
    scale = 1.0 + math.log(M / eta)
    if scale <= 0:
        raise DiscretizationError(f"eta={eta} is beyond e*M; the logarithmic factor is not positive")
    return _least_integer_at_least(constant_C1 * (scale / eta) ** 2)


def bc2_required_m(eta: float, r: float, constant_C1: float = 1.0) -> int:
    """Least m with m eta^{1/r} >= C1, for entropy numbers decaying like n^{-r}, 0 < r < 1/2."""
    _check_positive(eta=eta, constant_C1=constant_C1)
    if not 0 < r < 0.5:
        raise InvalidClassError(f"the entropy exponent must lie in (0, 1/2), got r={r}")
    return _least_integer_at_least(constant_C1 / eta ** (1.0 / r))


def entropy_regime(seq: EntropySequence) -> str:
    """'summable' when sum_n n^{-1/2} eps_n converges (decay faster than n^{-1/2}), else 'divergent'."""
    if seq.form == EntropyForm.POWER_LAW:
        rate = seq.r
    else:
        if len(seq.values) < 2:
            raise SequenceTooShortError("need at least two entropy numbers to estimate a decay rate")
        # log-log slope over the second half of the list
        start = len(seq.values) // 2 if len(seq.values) >= 4 else 0
        n = np.arange(start + 1, len(seq.values) + 1, dtype=float)
        rate = -np.polyfit(np.log(n), np.log(seq.values[start:]), 1)[0]
    return "summable" if rate > 0.5 else "divergent"


def covering_estimate(family: Sequence[TrigPolynomial], eps: float, grid: int = 16) -> int:
    """Size of a greedy eps-cover of the family in the sup metric on a tensor grid of grid^d points."""
    _check_positive(eps=eps)
    if not family:
        return 0
    nodes = tensor_grid_rule(grid, family[0].d)
    values = np.stack([evaluate_on_lattice(f, nodes.numerators, nodes.denominator) for f in family])
    uncovered = np.ones(len(family), dtype=bool)
    centers = 0
    while uncovered.any():
        center = int(np.argmax(uncovered))
        distances = np.max(np.abs(values - values[center]), axis=1)
        uncovered &= distances > eps
        centers += 1
    return centers


def trial_seed(seed: int, m: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, m, trial]).generate_state(1)[0])


def random_design_experiment(spec: ClassSpec, box: FrequencyBox, m_list: Sequence[int], trials: int,
                             family_size: int, eta_grid: Sequence[float], seed: int = 0,
                             family: Optional[List[TrigPolynomial]] = None) -> RandomDesignReport:
    """
    Sup of the q=2 defect over a fixed seeded family, for `trials` Monte Carlo designs per m.

    Each row reports best/median/worst over trials, the fraction of trials whose
    sup exceeds each eta, and the union-bound prediction min(1, 2N exp(-m eta^2/(8M^2)))
    with M the certified sup-norm bound of |f|^2 over the family.
    """
    if family is None:
        family = [random_unit_ball_sample(spec, box, np.random.SeedSequence([seed, i]), real_valued=True)
                  for i in range(family_size)]
    M = max(sup_norm_bound(f) ** 2 for f in family)
    M = M if M > 0 else 1.0
    tasks = [(m, t) for m in sorted(m_list) for t in range(trials)]

    def sup_defect(task) -> float:
        m, t = task
        rule = monte_carlo_rule(m, spec.d, trial_seed(seed, m, t))
        return max(er_abs(f, rule, 2) for f in family)

    with ThreadPoolExecutor() as pool:
        sups = list(pool.map(sup_defect, tasks))

    rows = []
    for i, m in enumerate(sorted(m_list)):
        values = np.array(sups[i * trials:(i + 1) * trials])
        tail_fraction: Dict[str, float] = {}
        prediction: Dict[str, float] = {}
        within = True
        for eta in eta_grid:
            key = repr(float(eta))
            frac = float(np.mean(values > eta))
            p = min(1.0, len(family) * hoeffding_tail(m, eta, M).raw)
            tail_fraction[key] = frac
            prediction[key] = p
            if p < 1.0 and frac > p + Z_99 * math.sqrt(p * (1.0 - p) / trials) + 1e-12:
                within = False
        rows.append(RandomDesignRow(m=m, best=float(values.min()), median=float(np.median(values)),
                                    worst=float(values.max()), tail_fraction=tail_fraction,
                                    union_prediction=prediction, within_union_bound=within))
        logger.info(f"random design m={m}: best {values.min():.4g}, median {np.median(values):.4g}")

    median_rate = None
    usable = [(row.m, row.median) for row in rows if row.median > 0]
    if len({m for m, _ in usable}) >= 2:
        ms, meds = zip(*usable)
        median_rate = float(-np.polyfit(np.log(ms), np.log(meds), 1)[0])

    from .experiments import rate_fit

    best_rate = None
    try:
        best_rate = rate_fit([[row.m, row.best] for row in rows if row.best > 0], RateModel.POWER)
        logger.info(f"random design best-over-trials rate: m^-{best_rate.r_hat:.3f}")
    except DiscretizationError as e:
        logger.debug(f"no best-over-trials rate: {e}")
    return RandomDesignReport(seed=seed, trials=trials, family_size=len(family), M=M, rows=rows,
                              median_rate=median_rate, best_rate=best_rate)
