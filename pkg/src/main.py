from fastapi import FastAPI, HTTPException
import logging

from .settings import get_settings

# Configure logging
logging.basicConfig(
    level=get_settings().log_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

from .models import (
    ComputationResponse, ErBatchRequest, ErBoundRequest, ErEvalRequest, ExperimentConfig, FoolRequest,
    McExperimentRequest, QualityRequest, RateFitRequest, RuleRequest, WitnessRequest,
)
from .discretization_service import DiscretizationService

app = FastAPI(
    title="Sampling Discretization API",
    version="1.0.0",
    description="""
Certified numerical integration and sampling discretization on the d-dimensional torus.

## Features
- Fibonacci, Korobov rank-1, tensor-grid and Monte Carlo cubature rules
- Exact worst-case integration errors over the classes W^r_2 and E^r
- Discretization errors of L_q norms and their upper bounds
- Fooling functions and witness pairs for certified lower bounds
- Monte Carlo concentration experiments and rate fits

Failed computations answer with status 400 and the reason in `detail`.
""",
    license_info={
        "name": "MIT License",
    },
    openapi_tags=[
        {
            "name": "general",
            "description": "General API information and health checks",
        },
        {
            "name": "rules",
            "description": "Cubature rule construction and worst-case integration errors",
        },
        {
            "name": "discretization",
            "description": "Discretization errors of L_q norms and their bounds",
        },
        {
            "name": "lower-bounds",
            "description": "Aliasing witnesses and fooling certificates",
        },
        {
            "name": "experiments",
            "description": "Monte Carlo experiments, rate fits and configured runs",
        },
    ]
)

# clients only choose subdirectories of the report directory
service = DiscretizationService(output_root=get_settings().report_dir)


def _unwrap(response: ComputationResponse) -> dict:
    if not response.success:
        logger.warning(f"Request failed: {response.message}")
        raise HTTPException(status_code=400, detail=response.message)
    return response.result


@app.get("/", tags=["general"])
async def root():
    """Service information."""
    settings = get_settings()
    return {
        "name": app.title,
        "version": app.version,
        "docs": "/docs",
        "report_dir": settings.report_dir,
        "tolerances": {"abs": settings.abs_tol, "rel": settings.rel_tol, "rank": settings.rank_tol},
    }


@app.get("/health", tags=["general"])
async def health_check():
    """Health check endpoint."""
    return {"status": "healthy", "service": "sampling-discretization"}


@app.post("/rules/build", tags=["rules"])
def build_rule(request: RuleRequest):
    """
    Build a cubature rule and return its nodes.

    Lattice nodes come back as exact [numerator, denominator] pairs per coordinate.
    """
    logger.info(f"Building {request.kind.value} rule")
    return _unwrap(service.rule_build(request))


@app.post("/rules/quality", tags=["rules"])
def rule_quality(request: QualityRequest):
    """
    Worst-case integration error of a lattice rule over the unit ball of the class,
    as a certified interval. A rank-1 rule without `z` is found by Korobov search.
    """
    return _unwrap(service.rule_quality(request))


@app.post("/er/eval", tags=["discretization"])
def er_eval(request: ErEvalRequest):
    """Signed and absolute discretization error of the L_q norm of one polynomial."""
    return _unwrap(service.er_eval(request))


@app.post("/er/batch", tags=["discretization"])
def er_batch(request: ErBatchRequest):
    """
    Discretization errors of several polynomials on one rule.

    The records are also written as `<name>.csv`, optionally under `output_dir`
    relative to the report directory.
    """
    logger.info(f"Evaluating {len(request.polynomials)} polynomials")
    return _unwrap(service.er_batch(request))


@app.post("/er/bound", tags=["discretization"])
def er_bound(request: ErBoundRequest):
    """Upper bound a^{q-1} kappa on the discretization error over the class."""
    return _unwrap(service.er_bound(request))


@app.post("/witness", tags=["lower-bounds"])
def witness(request: WitnessRequest):
    """Two-term function aliased by the rule, with its achieved error."""
    return _unwrap(service.witness(request))


@app.post("/fool", tags=["lower-bounds"])
def fool(request: FoolRequest):
    """Fooling certificate on the rule's nodes plus the shifted-pair and L_q lower bounds."""
    return _unwrap(service.fool(request))


@app.post("/mc-experiment", tags=["experiments"])
def mc_experiment(request: McExperimentRequest):
    """Random designs against the union bound for a seeded function family."""
    return _unwrap(service.mc_experiment(request))


@app.post("/rate-fit", tags=["experiments"])
def fit_rate(request: RateFitRequest):
    """Least-squares fit of log e = -r log m + beta log log m + c."""
    return _unwrap(service.rate_fit(request))


@app.post("/run", tags=["experiments"])
def run(config: ExperimentConfig):
    """Run a configured experiment and write its CSV and JSON reports; `output_dir` is relative to the report directory."""
    logger.info(f"Running experiment {config.name}")
    return _unwrap(service.run(config))
