"""
Command-line surface.

Exit codes: 0 when every hard assertion passed, 1 when a run completed with a
failed assertion, 2 for invalid input or a failed computation.
"""

import argparse
import csv
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .settings import get_settings
from .models import (
    ClassKind, ClassSpec, ComputationResponse, ErBatchRequest, ErBoundRequest, ErEvalRequest, ExperimentConfig,
    FoolRequest, McExperimentRequest, QualityRequest, RateFitRequest, RateModel, RuleKind, RuleRequest,
    TrigPolynomialPayload, WitnessRequest,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_INVALID = 2

CLASS_ALIASES = {"W": ClassKind.SOBOLEV_MIXED, "E": ClassKind.KOROBOV,
                 "sobolev_mixed": ClassKind.SOBOLEV_MIXED, "korobov": ClassKind.KOROBOV}


def _add_rule_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("rule")
    group.add_argument("--kind", choices=[k.value for k in RuleKind if k != RuleKind.EXPLICIT],
                       default=RuleKind.FIBONACCI.value)
    group.add_argument("--n", type=int, help="Fibonacci index")
    group.add_argument("--m", type=int, help="number of nodes (rank-1 modulus, Monte Carlo size)")
    group.add_argument("--z", type=int, nargs="+", help="rank-1 generator; omit to run the Korobov search")
    group.add_argument("--grid", type=int, help="points per axis of a tensor grid")
    group.add_argument("--d", type=int, default=2, help="dimension")
    group.add_argument("--seed", type=int, default=0)


def _add_class_arguments(parser: argparse.ArgumentParser, required: bool = True) -> None:
    group = parser.add_argument_group("class")
    group.add_argument("--class", dest="class_kind", choices=sorted(CLASS_ALIASES), required=required,
                       help="W = W^r_2 (mixed Sobolev), E = E^r (Korobov)")
    group.add_argument("--r", type=float, default=1.0, help="smoothness")


def _dimension(args) -> int:
    if args.kind == RuleKind.FIBONACCI.value:
        return 2
    if getattr(args, "z", None):
        return len(args.z)
    return args.d


def _rule_request(args) -> RuleRequest:
    return RuleRequest(kind=args.kind, d=_dimension(args), n=args.n, m=args.m, z=args.z,
                       seed=args.seed, grid=args.grid)


def _class_spec(args) -> Optional[ClassSpec]:
    if getattr(args, "class_kind", None) is None:
        return None
    return ClassSpec(kind=CLASS_ALIASES[args.class_kind], r=args.r, d=_dimension(args))


def _load_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _load_pairs(path: str) -> List[List[float]]:
    """Pairs from a JSON list [[m, e], ...] or a two-column CSV (comment lines start with #)."""
    if path.endswith(".json"):
        return [[float(m), float(e)] for m, e in _load_json(path)]
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = [row for row in csv.reader(line for line in f if not line.startswith("#")) if row]
    return [[float(row[0]), float(row[1])] for row in rows if _is_number(row[0])]


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _dispatch(args, service) -> ComputationResponse:
    command = args.command
    if command == "rule":
        if args.rule_command == "build":
            return service.rule_build(_rule_request(args), _class_spec(args))
        return service.rule_quality(QualityRequest(rule=_rule_request(args), class_spec=_class_spec(args),
                                                   method=args.method, enumeration_limit=args.precision))
    if command == "er":
        if args.er_command == "eval":
            payload = TrigPolynomialPayload.model_validate(_load_json(args.poly))
            return service.er_eval(ErEvalRequest(rule=_rule_request(args), polynomial=payload, q=args.q))
        if args.er_command == "batch":
            payloads = [TrigPolynomialPayload.model_validate(_load_json(path)) for path in args.poly]
            return service.er_batch(ErBatchRequest(rule=_rule_request(args), class_spec=_class_spec(args),
                                                   polynomials=payloads, q=args.q, name=args.name,
                                                   output_dir=args.output_dir))
        return service.er_bound(ErBoundRequest(rule=_rule_request(args), class_spec=_class_spec(args), q=args.q,
                                               sample_box_limit=args.sample_box,
                                               quasi_box_limit=args.quasi_box))
    if command == "witness":
        return service.witness(WitnessRequest(rule=_rule_request(args), class_spec=_class_spec(args),
                                              box_limit=args.box))
    if command == "fool":
        return service.fool(FoolRequest(rule=_rule_request(args), class_spec=_class_spec(args),
                                        box_limit=args.box, q=args.q))
    if command == "mc-experiment":
        spec = ClassSpec(kind=CLASS_ALIASES[args.class_kind], r=args.r, d=args.d)
        return service.mc_experiment(McExperimentRequest(class_spec=spec, box_limit=args.box, m_list=args.m_list,
                                                         trials=args.trials, family_size=args.family_size,
                                                         eta_grid=args.eta, seed=args.seed))
    if command == "rate-fit":
        return service.rate_fit(RateFitRequest(pairs=_load_pairs(args.pairs), model=args.model))
    if command == "run":
        data = _load_json(args.config)
        if args.seed is not None:
            data["seed"] = args.seed
        if args.output_dir is not None:
            data["output_dir"] = args.output_dir
        return service.run(ExperimentConfig.model_validate(data))
    raise ValueError(f"unknown command {command}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampling-discretization",
                                     description="Certified integration and sampling discretization on the torus")
    parser.add_argument("--log-level", default=None, help="overrides SAMPLING_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    rule = commands.add_parser("rule", help="build rules and compute their worst-case errors")
    rule_commands = rule.add_subparsers(dest="rule_command", required=True)
    build = rule_commands.add_parser("build", help="print a rule with exact rational nodes")
    _add_rule_arguments(build)
    _add_class_arguments(build, required=False)
    quality = rule_commands.add_parser("quality", help="worst-case integration error interval")
    _add_rule_arguments(quality)
    _add_class_arguments(quality)
    quality.add_argument("--method", choices=["auto", "enumeration", "closed_form"], default="auto")
    quality.add_argument("--precision", type=int, default=64, help="enumeration box |k_j| <= precision")

    er = commands.add_parser("er", help="discretization errors")
    er_commands = er.add_subparsers(dest="er_command", required=True)
    er_eval = er_commands.add_parser("eval", help="signed defect of one polynomial")
    _add_rule_arguments(er_eval)
    er_eval.add_argument("--poly", required=True, help="JSON file {d, coeffs: [[k_1..k_d, re, im], ...]}")
    er_eval.add_argument("--q", type=int, default=2)
    er_batch = er_commands.add_parser("batch", help="signed defects of several polynomials, written as CSV")
    _add_rule_arguments(er_batch)
    _add_class_arguments(er_batch)
    er_batch.add_argument("--poly", nargs="+", required=True, help="one JSON polynomial file per row")
    er_batch.add_argument("--q", type=int, default=2)
    er_batch.add_argument("--name", default="defects", help="report name, written as <name>.csv")
    er_batch.add_argument("--output-dir", default=None)
    er_bound = er_commands.add_parser("bound", help="a^{q-1} kappa upper bound over the class")
    _add_rule_arguments(er_bound)
    _add_class_arguments(er_bound)
    er_bound.add_argument("--q", type=int, default=2)
    er_bound.add_argument("--sample-box", type=int, default=3)
    er_bound.add_argument("--quasi-box", type=int, default=2048)

    witness = commands.add_parser("witness", help="two-term aliasing witness of a lattice rule")
    _add_rule_arguments(witness)
    _add_class_arguments(witness)
    witness.add_argument("--box", type=int, default=8)

    fool = commands.add_parser("fool", help="fooling certificate on the rule's nodes")
    _add_rule_arguments(fool)
    _add_class_arguments(fool)
    fool.add_argument("--box", type=int, default=4)
    fool.add_argument("--q", type=int, default=2)

    mc = commands.add_parser("mc-experiment", help="random designs against the union bound")
    _add_class_arguments(mc)
    mc.add_argument("--d", type=int, default=2)
    mc.add_argument("--box", type=int, default=2)
    mc.add_argument("--m-list", type=int, nargs="+", required=True)
    mc.add_argument("--trials", type=int, default=50)
    mc.add_argument("--family-size", type=int, default=8)
    mc.add_argument("--eta", type=float, nargs="+", required=True)
    mc.add_argument("--seed", type=int, default=0)

    fit = commands.add_parser("rate-fit", help="fit log e = -r log m + beta log log m + c")
    fit.add_argument("--pairs", required=True, help="JSON [[m, e], ...] or two-column CSV")
    fit.add_argument("--model", choices=[m.value for m in RateModel], default=RateModel.LOG_POWER.value)

    run = commands.add_parser("run", help="configured experiment writing CSV and JSON reports")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--output-dir", default=None)

    serve = commands.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--reload", action="store_true")
    return parser


def serve(args) -> int:
    import uvicorn

    settings = get_settings()
    host = args.host or settings.api_host
    port = args.port or settings.api_port
    logger.info("Starting Sampling Discretization API server...")
    logger.info(f"Server will be available at: http://{host}:{port}")
    logger.info(f"API documentation: http://{host}:{port}/docs")
    uvicorn.run("src.main:app", host=host, port=port, log_level=settings.log_level.lower(),
                access_log=True, reload=args.reload)
    return EXIT_OK


def main(argv: Optional[List[str]] = None, service=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or get_settings().log_level).upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    if args.command == "serve":
        return serve(args)

    if service is None:
        from .discretization_service import DiscretizationService
        service = DiscretizationService()
    try:
        response = _dispatch(args, service)
    except (ValidationError, ValueError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    if not response.success:
        print(f"error: {response.message}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(response.result, indent=2, sort_keys=True, default=str))
    if response.result.get("all_passed") is False:
        logger.error("Hard assertion failed")
        return EXIT_ASSERTION
    return EXIT_OK
