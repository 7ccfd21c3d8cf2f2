"""
Experiment driver: rule sweeps with upper/lower sandwiches, rate fits and report files.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateFitError, DiscretizationError, EmptyBoxError, EmptyNullspaceError, ExperimentConfigError,
)
from .fourier_core import quasi_algebra_constant
from .lattice_cubature import (
    CubatureRule, fibonacci_rule, is_prime, korobov_search, monte_carlo_rule, rank1_rule, worst_case_error,
)
from .discretization import discretization_bound, empirical_sup_er, two_term_witness
from .lower_bounds import elimination_witness, fooling_function
from .prob_bounds import trial_seed
from .models import (
    ClassKind, ClassSpec, ExperimentConfig, ExperimentReport, ExperimentRow, FrequencyBox,
    RateFitReport, RateModel, RuleFamilyKind,
)
from .report_storage import ReportStorage
from .settings import get_settings

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["rule_id", "m", "kappa_lo", "kappa_hi", "bound", "empirical_sup", "witness_er",
               "fooling_integral", "certified_lower", "sandwich_ok"]
MIN_FIT_PAIRS = 4


def rate_fit(pairs: Sequence[Sequence[float]], model: RateModel = RateModel.LOG_POWER) -> RateFitReport:
    """
    Least squares for log e = -r log m + beta log log m + c (beta = 0 for the power model).

    residual is the root mean square of the log-residuals.
    """
    pairs = [(float(m), float(e)) for m, e in pairs]
    if len(pairs) < MIN_FIT_PAIRS:
        raise ExperimentConfigError(f"rate fit needs at least {MIN_FIT_PAIRS} pairs, got {len(pairs)}")
    if any(m < 3 for m, _ in pairs):
        raise ExperimentConfigError("rate fit needs m >= 3 so that log log m is defined and positive")
    if any(not e > 0 for _, e in pairs):
        raise ExperimentConfigError("rate fit needs positive errors")
    m = np.array([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    columns = [-np.log(m)]
    if model == RateModel.LOG_POWER:
        columns.append(np.log(np.log(m)))
    columns.append(np.ones_like(m))
    X = np.column_stack(columns)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateFitError(f"design matrix has rank {rank} < {X.shape[1]}; vary m more")
    residual = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    beta = float(coef[1]) if model == RateModel.LOG_POWER else 0.0
    return RateFitReport(model=model, pairs=[list(p) for p in pairs], r_hat=float(coef[0]),
                         beta_hat=beta, c_hat=float(coef[-1]), residual=residual)


def reference_rate(spec: ClassSpec, family: RuleFamilyKind) -> Tuple[float, float]:
    """(r, beta) of the rate m^-r (log m)^beta expected for the rule family on the class."""
    if family == RuleFamilyKind.MONTE_CARLO:
        return 0.5, 0.0
    if family == RuleFamilyKind.FIBONACCI:
        return spec.r, 0.5 if spec.kind == ClassKind.SOBOLEV_MIXED else 1.0
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        return spec.r, spec.r * (spec.d - 1)
    return spec.r, float(spec.d - 1)


def optimal_rate(spec: ClassSpec) -> Tuple[float, float]:
    """Best achievable order over all node sets: beta = (d-1)/2 for W^r_2, d-1 for E^r."""
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        return spec.r, (spec.d - 1) / 2
    return spec.r, float(spec.d - 1)


def rate_label(r: float, beta: float) -> str:
    return f"m^-{r:g} (log m)^{beta:g}" if beta else f"m^-{r:g}"


def _support_limit(config: ExperimentConfig) -> int:
    """Frequencies of |f|^q stay within q times the larger of the sample and fooling boxes."""
    return config.q * max(config.sample_box_limit, config.fooling_box_limit)


def validate_config(config: ExperimentConfig) -> None:
    spec, family = config.class_spec, config.rule_family
    if family.kind == RuleFamilyKind.FIBONACCI and spec.d != 2:
        raise ExperimentConfigError("Fibonacci rules live in d=2")
    if family.kind == RuleFamilyKind.KOROBOV:
        if spec.d < 2:
            raise ExperimentConfigError("Korobov rules need d >= 2")
        bad = [m for m in family.m_list if not is_prime(m)]
        if bad:
            raise ExperimentConfigError(f"Korobov moduli must be prime, got {bad}")
    if config.quasi_box_limit < _support_limit(config):
        raise ExperimentConfigError(
            f"quasi_box_limit={config.quasi_box_limit} must cover the support of |f|^q "
            f"(q * box = {_support_limit(config)})"
        )


def build_family(config: ExperimentConfig) -> List[CubatureRule]:
    spec, family = config.class_spec, config.rule_family
    if family.kind == RuleFamilyKind.FIBONACCI:
        rules = [fibonacci_rule(n) for n in range(family.n_min, family.n_max + 1)]
    elif family.kind == RuleFamilyKind.KOROBOV:
        rules = [rank1_rule(korobov_search(m, spec, precision=config.enumeration_limit)) for m in family.m_list]
    else:
        rules = [monte_carlo_rule(m, spec.d, trial_seed(config.seed, m, t))
                 for m in family.m_list for t in range(family.trials)]
    return sorted(rules, key=lambda rule: rule.m)


def evaluate_rule(rule: CubatureRule, spec: ClassSpec, config: ExperimentConfig) -> ExperimentRow:
    """One sandwich row: witness <= empirical sup <= bound, and the certified lower bound <= bound."""
    settings = get_settings()
    q = config.q
    support = FrequencyBox.tensor(spec.d, _support_limit(config))
    sample_box = FrequencyBox.tensor(spec.d, config.sample_box_limit)
    if rule.is_lattice:
        bound = discretization_bound(rule, spec, q, precision=config.enumeration_limit)
    else:
        bound = discretization_bound(rule, spec, q, box=support)

    witness = 0.0
    if rule.is_lattice:
        try:
            witness = two_term_witness(rule, spec, q, box_limit=config.sample_box_limit)[1]
        except EmptyBoxError:
            logger.debug(f"{rule.rule_id}: no aliased frequency in the sample box")
    empirical = empirical_sup_er(rule, spec, q, config.n_samples, config.seed, box=sample_box,
                                 witness_box_limit=config.sample_box_limit)

    fooling_integral = certified = None
    if spec.kind == ClassKind.SOBOLEV_MIXED:
        try:
            certificate = fooling_function(rule.nodes, spec, FrequencyBox.tensor(spec.d, config.fooling_box_limit))
            fooling_integral = certificate.integral
            certified = elimination_witness(certificate.f, rule, q, spec).certified_lower
        except EmptyNullspaceError:
            fooling_integral, certified = 0.0, 0.0

    tol = settings.abs_tol + settings.rel_tol * bound.value
    ok = witness <= empirical + tol and empirical <= bound.value + tol
    if certified is not None:
        ok = ok and certified <= bound.value + tol
    if not ok:
        logger.error(f"{rule.rule_id}: sandwich violated (witness {witness}, empirical {empirical}, "
                     f"bound {bound.value}, certified {certified})")
    logger.info(f"{rule.rule_id}: kappa {bound.kappa.hi:.4g}, bound {bound.value:.4g}, empirical {empirical:.4g}")
    return ExperimentRow(rule_id=rule.rule_id, m=rule.m, kappa_lo=bound.kappa.lo, kappa_hi=bound.kappa.hi,
                         bound=bound.value, empirical_sup=empirical, witness_er=witness,
                         fooling_integral=fooling_integral, certified_lower=certified, sandwich_ok=ok)


def _fit_column(rows: Sequence[ExperimentRow], column: str) -> Optional[RateFitReport]:
    pairs = [(row.m, getattr(row, column)) for row in rows
             if row.m >= 3 and getattr(row, column) is not None and getattr(row, column) > 0]
    if len(pairs) < MIN_FIT_PAIRS:
        return None
    try:
        return rate_fit(pairs, RateModel.LOG_POWER)
    except DiscretizationError as e:
        logger.warning(f"skipping the {column} fit: {e}")
        return None


def csv_rows(rows: Sequence[ExperimentRow]) -> List[List[str]]:
    def cell(value) -> str:
        if value is None:
            return ""
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    return [[cell(getattr(row, column)) for column in CSV_COLUMNS] for row in rows]


def run_experiment(config: ExperimentConfig, storage: Optional[ReportStorage] = None) -> ExperimentReport:
    """
    Evaluate every rule of the family, fit rates to the envelopes and write CSV + JSON reports.

    Errors are re-raised with the offending rule named; nothing is written when the
    configuration is invalid.
    """
    validate_config(config)
    spec = config.class_spec
    quasi = quasi_algebra_constant(spec, _support_limit(config), FrequencyBox.tensor(spec.d, config.quasi_box_limit))
    spec_a = spec.with_quasi_algebra_constant(quasi.constant_upper)
    logger.info(f"{config.name}: quasi-algebra constant {quasi.constant:.6g} (certified {quasi.constant_upper:.6g}) "
                f"for {spec.class_id}")

    rules = build_family(config)

    def work(rule: CubatureRule) -> ExperimentRow:
        try:
            return evaluate_rule(rule, spec_a, config)
        except DiscretizationError as e:
            raise type(e)(f"{rule.rule_id}: {e}") from e

    with ThreadPoolExecutor() as pool:
        rows = list(pool.map(work, rules))

    fits: Dict[str, RateFitReport] = {}
    for column in ("kappa_hi", "bound", "empirical_sup", "certified_lower"):
        fit = _fit_column(rows, column)
        if fit is not None:
            fits[column] = fit

    r, beta = reference_rate(spec, config.rule_family.kind)
    report = ExperimentReport(config=config, rows=rows, quasi_algebra=quasi, fits=fits,
                              reference_model=rate_label(r, beta),
                              all_passed=all(row.sandwich_ok for row in rows))

    storage = storage or ReportStorage(config.output_dir)
    csv_name = f"{config.name}.csv"
    storage.write_csv(csv_name, CSV_COLUMNS, csv_rows(rows))
    report.csv_path = storage.path_for(csv_name)
    report.json_path = storage.path_for(f"{config.name}.json")
    storage.set_json(config.name, report)
    logger.info(f"{config.name}: {len(rows)} rows, all_passed={report.all_passed}")
    return report


def worst_case_pairs(rules: Sequence[CubatureRule], spec: ClassSpec, precision: int = 64) -> List[List[float]]:
    """(m, kappa.hi) pairs for a rate fit of the worst-case integration error."""
    return [[float(rule.m), worst_case_error(rule, spec, precision=precision).hi] for rule in rules]
