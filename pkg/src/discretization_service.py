import logging
import os
import threading
from typing import Dict, Optional, Tuple

from .errors import DiscretizationError, ExperimentConfigError
from .fourier_core import TrigPolynomial, quasi_algebra_constant
from .lattice_cubature import (
    CubatureRule, fibonacci_rule, korobov_search, monte_carlo_rule, rank1_rule, tensor_grid_rule,
    worst_case_error,
)
from .discretization import (
    defect_batch, discretization_bound, signed_defect, two_term_witness, write_defect_batch,
)
from .lower_bounds import elimination_witness, fooling_function, shifted_pair
from .prob_bounds import random_design_experiment
from .experiments import rate_fit, run_experiment
from .models import (
    ClassSpec, ComputationResponse, ErBatchRequest, ErBoundRequest, ErEvalRequest, ExperimentConfig, FoolRequest,
    FrequencyBox, McExperimentRequest, QualityRequest, QuasiAlgebraReport, Rank1Generator, RateFitRequest,
    RuleKind, RuleRequest, WitnessRequest,
)
from .report_storage import ReportStorage

logger = logging.getLogger(__name__)


class DiscretizationService:
    def __init__(self, storage: Optional[ReportStorage] = None, output_root: Optional[str] = None):
        """With output_root set, requested output directories must resolve inside it."""
        self.storage = storage or ReportStorage()
        self.output_root = output_root

        # quasi-algebra constants are the slow part of every bound; keep them per (class, range, box)
        self.constant_cache: Dict[Tuple, QuasiAlgebraReport] = {}
        self.constant_lock = threading.Lock()

    def build_rule(self, request: RuleRequest, spec: Optional[ClassSpec] = None) -> CubatureRule:
        """
        Build the rule a request describes.
        A rank-1 request without z runs the Korobov search, which needs the class.
        """
        if request.kind == RuleKind.FIBONACCI:
            if request.n is None:
                raise ExperimentConfigError("fibonacci rules need n")
            return fibonacci_rule(request.n)
        if request.kind == RuleKind.RANK1:
            if request.m is None:
                raise ExperimentConfigError("rank-1 rules need m")
            if request.z is None:
                if spec is None:
                    raise ExperimentConfigError("pass z or a class to search a Korobov generator")
                return rank1_rule(korobov_search(request.m, spec))
            return rank1_rule(Rank1Generator(m=request.m, z=request.z))
        if request.kind == RuleKind.MONTE_CARLO:
            if request.m is None:
                raise ExperimentConfigError("Monte Carlo rules need m")
            return monte_carlo_rule(request.m, request.d, request.seed)
        if request.kind == RuleKind.TENSOR_GRID:
            if request.grid is None:
                raise ExperimentConfigError("tensor grids need the number of points per axis")
            return tensor_grid_rule(request.grid, request.d)
        raise ExperimentConfigError(f"{request.kind.value} rules cannot be built from a request")

    def get_constant(self, spec: ClassSpec, n_range: int, box_limit: int) -> QuasiAlgebraReport:
        key = (spec.kind, spec.r, spec.d, n_range, box_limit)
        with self.constant_lock:
            report = self.constant_cache.get(key)
            if report is None:
                report = quasi_algebra_constant(spec, n_range, FrequencyBox.tensor(spec.d, box_limit))
                self.constant_cache[key] = report
        return report

    def storage_for(self, output_dir: Optional[str]) -> ReportStorage:
        if not output_dir:
            return self.storage
        if self.output_root is None:
            return ReportStorage(output_dir)
        root = os.path.realpath(self.output_root)
        target = os.path.realpath(os.path.join(root, output_dir))
        if os.path.commonpath([root, target]) != root:
            raise ExperimentConfigError(f"output directory {output_dir} is outside {self.output_root}")
        return ReportStorage(target)

    def _respond(self, action: str, compute) -> ComputationResponse:
        try:
            result = compute()
        except (DiscretizationError, ValueError, OverflowError) as e:
            logger.error(f"{action} failed: {e}")
            return ComputationResponse(success=False, message=str(e))
        return ComputationResponse(success=True, message=f"{action} completed", result=result)

    def rule_build(self, request: RuleRequest, spec: Optional[ClassSpec] = None) -> ComputationResponse:
        def compute():
            rule = self.build_rule(request, spec)
            logger.info(f"Built {rule.rule_id} with {rule.m} nodes")
            return {"rule_id": rule.rule_id, **rule.to_payload()}
        return self._respond("rule build", compute)

    def rule_quality(self, request: QualityRequest) -> ComputationResponse:
        def compute():
            rule = self.build_rule(request.rule, request.class_spec)
            kappa = worst_case_error(rule, request.class_spec, precision=request.enumeration_limit,
                                     method=request.method)
            return {"rule_id": rule.rule_id, "class_id": request.class_spec.class_id, "m": rule.m,
                    "generator": rule.tag.generator, "kappa": kappa.model_dump()}
        return self._respond("rule quality", compute)

    def er_eval(self, request: ErEvalRequest) -> ComputationResponse:
        def compute():
            f = TrigPolynomial.from_payload(request.polynomial.model_dump())
            rule = self.build_rule(request.rule)
            defect = signed_defect(f, rule, request.q)
            return {"rule_id": rule.rule_id, "m": rule.m, "q": request.q,
                    "signed_defect": defect, "er_abs": abs(defect)}
        return self._respond("er eval", compute)

    def er_batch(self, request: ErBatchRequest) -> ComputationResponse:
        """Defects of several polynomials on one rule, written as a CSV report."""
        def compute():
            storage = self.storage_for(request.output_dir)
            fs = [TrigPolynomial.from_payload(p.model_dump()) for p in request.polynomials]
            rule = self.build_rule(request.rule, request.class_spec)
            records = defect_batch(fs, rule, request.class_spec, request.q)
            name = f"{request.name}.csv"
            write_defect_batch(records, storage, name)
            return {"rule_id": rule.rule_id, "m": rule.m, "q": request.q,
                    "records": [record.model_dump() for record in records],
                    "csv_path": storage.path_for(name)}
        return self._respond("er batch", compute)

    def er_bound(self, request: ErBoundRequest) -> ComputationResponse:
        def compute():
            spec = request.class_spec
            rule = self.build_rule(request.rule, spec)
            support = request.q * request.sample_box_limit
            quasi = self.get_constant(spec, support, request.quasi_box_limit)
            spec_a = spec.with_quasi_algebra_constant(quasi.constant_upper)
            box = None if rule.is_lattice else FrequencyBox.tensor(spec.d, support)
            bound = discretization_bound(rule, spec_a, request.q, box=box)
            return {"rule_id": rule.rule_id, "bound": bound.model_dump(), "quasi_algebra": quasi.model_dump()}
        return self._respond("er bound", compute)

    def witness(self, request: WitnessRequest) -> ComputationResponse:
        def compute():
            rule = self.build_rule(request.rule, request.class_spec)
            f, er = two_term_witness(rule, request.class_spec, box_limit=request.box_limit)
            return {"rule_id": rule.rule_id, "f": f.to_payload(), "er": er}
        return self._respond("witness", compute)

    def fool(self, request: FoolRequest) -> ComputationResponse:
        """Fooling certificate on the rule's nodes, its shifted pair and the L_q elimination bound."""
        def compute():
            spec = request.class_spec
            rule = self.build_rule(request.rule, spec)
            certificate = fooling_function(rule.nodes, spec, FrequencyBox.tensor(spec.d, request.box_limit))
            pair = shifted_pair(certificate.f, rule, spec)
            elimination = elimination_witness(certificate.f, rule, request.q, spec)
            passed = bool(max(abs(pair.defect_plus), abs(pair.defect_minus))
                          >= pair.certified_er_lower - 1e-12)
            return {"rule_id": rule.rule_id, "certificate": certificate.to_payload(),
                    "shifted_pair": pair.to_payload(), "elimination": elimination.to_payload(),
                    "all_passed": passed}
        return self._respond("fool", compute)

    def mc_experiment(self, request: McExperimentRequest) -> ComputationResponse:
        def compute():
            spec = request.class_spec
            report = random_design_experiment(spec, FrequencyBox.tensor(spec.d, request.box_limit),
                                              request.m_list, request.trials, request.family_size,
                                              request.eta_grid, request.seed)
            result = report.model_dump()
            result["all_passed"] = all(row.within_union_bound for row in report.rows)
            return result
        return self._respond("mc experiment", compute)

    def rate_fit(self, request: RateFitRequest) -> ComputationResponse:
        return self._respond("rate fit", lambda: rate_fit(request.pairs, request.model).model_dump())

    def run(self, config: ExperimentConfig) -> ComputationResponse:
        def compute():
            storage = self.storage_for(config.output_dir)
            return run_experiment(config, storage).model_dump(mode="json")
        return self._respond(f"experiment {config.name}", compute)
