"""
Constructive lower bounds: fooling functions that vanish on a node set, the
shifted pair (f +- 1)/2, the dyadic power chain and its even-q elimination variant.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import DiscretizationError, EmptyNullspaceError, InvalidClassError, MembershipError
from .fourier_core import (
    TrigPolynomial, box_points, check_even_exponent, class_norm, evaluate, evaluate_on_lattice,
    kernel_weights, power,
)
from .lattice_cubature import CubatureRule, apply_rule, tensor_grid_rule
from .discretization import signed_defect
from .models import ClassKind, ClassSpec, FrequencyBox
from .settings import get_settings

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FoolingConstraints:
    """
    Real form of f(xi^j) = 0 in the coordinates u = (phi_0, sqrt2 Re phi_k, sqrt2 Im phi_k), k in H.

    H holds the box frequencies whose first nonzero component is positive, so
    ||u||_2 is the W^r_2 norm of the real function with phi_{-k} = conj(phi_k).
    """
    matrix: np.ndarray = field(repr=False)
    half_set: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)

    @property
    def n_params(self) -> int:
        return self.matrix.shape[1]

    def to_polynomial(self, u: np.ndarray) -> TrigPolynomial:
        h = len(self.half_set)
        phi = (u[1:1 + h] + 1j * u[1 + h:]) / math.sqrt(2)
        coeffs = np.concatenate([[u[0]], self.kernel * phi, self.kernel * np.conj(phi)])
        d = self.half_set.shape[1]
        freqs = np.concatenate([np.zeros((1, d), dtype=np.int64), self.half_set, -self.half_set])
        return TrigPolynomial.from_arrays(d, freqs, coeffs)


@dataclass(frozen=True, eq=False)
class FoolingCertificate:
    f: TrigPolynomial
    points: np.ndarray = field(repr=False)
    box: FrequencyBox
    integral: float
    residuals: float
    class_norm_value: float
    rank: int

    def to_payload(self) -> Dict[str, object]:
        return {
            "f": self.f.to_payload(),
            "box": self.box.model_dump(mode="json"),
            "m": len(self.points),
            "integral": self.integral,
            "residuals": self.residuals,
            "class_norm": self.class_norm_value,
            "rank": self.rank,
        }


@dataclass(frozen=True, eq=False)
class WitnessPair:
    f_plus: TrigPolynomial
    f_minus: TrigPolynomial
    defect_plus: float
    defect_minus: float
    integration_gap: float  # I(f) - Lambda(f)
    certified_er_lower: float

    def to_payload(self) -> Dict[str, float]:
        return {"defect_plus": self.defect_plus, "defect_minus": self.defect_minus,
                "integration_gap": self.integration_gap, "certified_er_lower": self.certified_er_lower}


@dataclass(frozen=True, eq=False)
class EliminationCertificate:
    """max_i |D_q(c (f + t_i))| >= q c^q |I(f) - Lambda(f)| / sum_i |w_i|."""
    q: int
    c: float
    nodes: List[float]
    weights: List[float]
    defects: List[float]
    integration_gap: float
    identity_residual: float
    certified_lower: float

    @property
    def best_defect(self) -> float:
        return max(abs(v) for v in self.defects)

    def to_payload(self) -> Dict[str, object]:
        return {"q": self.q, "c": self.c, "nodes": self.nodes, "weights": self.weights,
                "defects": self.defects, "integration_gap": self.integration_gap,
                "identity_residual": self.identity_residual, "certified_lower": self.certified_lower}


@dataclass(frozen=True, eq=False)
class ChainStage:
    k: int
    c_k: float
    pair: WitnessPair
    power_gap: float  # I(f^{2^k}) - Lambda(f^{2^k})
    stage_bound: float  # 2 c_k^2 |power_gap|
    identity_residual: float


@dataclass(frozen=True, eq=False)
class PowerChain:
    s: int
    a: float
    stages: List[ChainStage]
    elimination: EliminationCertificate

    @property
    def q(self) -> int:
        return 2 ** self.s

    @property
    def c_s(self) -> float:
        """c_0 c_1 ... c_{s-1}."""
        return math.prod(st.c_k for st in self.stages)

    @property
    def integration_gap(self) -> float:
        return self.stages[0].power_gap

    @property
    def chain_lower(self) -> float:
        """c(s) |I(f) - Lambda(f)| / 2, the L_q lower bound carried down the chain."""
        return self.c_s * abs(self.integration_gap) / 2.0

    @property
    def elimination_lower(self) -> float:
        return self.elimination.certified_lower

    @property
    def certified_lq_lower(self) -> float:
        return self.chain_lower

    def to_payload(self) -> Dict[str, object]:
        return {
            "s": self.s, "q": self.q, "a": self.a,
            "stages": [{"k": st.k, "c_k": st.c_k, "power_gap": st.power_gap, "stage_bound": st.stage_bound,
                        "identity_residual": st.identity_residual, **st.pair.to_payload()}
                       for st in self.stages],
            "elimination": self.elimination.to_payload(),
            "c_s": self.c_s,
            "integration_gap": self.integration_gap,
            "chain_lower": self.chain_lower,
            "elimination_lower": self.elimination_lower,
            "certified_lq_lower": self.certified_lq_lower,
        }


def _half_set(box: FrequencyBox) -> np.ndarray:
    points = box_points(box)
    nonzero = points != 0
    first = np.argmax(nonzero, axis=1)
    lead = points[np.arange(len(points)), first]
    return points[np.any(nonzero, axis=1) & (lead > 0)]


def fooling_constraints(points, spec: ClassSpec, box: FrequencyBox) -> FoolingConstraints:
    """Rows [1, sqrt2 F(k) cos(k, xi), -sqrt2 F(k) sin(k, xi)] for every node xi."""
    if spec.kind != ClassKind.SOBOLEV_MIXED:
        raise InvalidClassError("fooling functions are built for the W^r_2 ellipsoid only")
    if box.d != spec.d:
        raise DiscretizationError(f"box dimension {box.d} != class dimension {spec.d}")
    points = np.asarray(points, dtype=float).reshape(-1, spec.d)
    half = _half_set(box)
    kernel = kernel_weights(spec, half)
    phases = points @ half.T.astype(float)
    scaled = math.sqrt(2) * kernel
    matrix = np.hstack([np.ones((len(points), 1)), scaled * np.cos(phases), -scaled * np.sin(phases)])
    return FoolingConstraints(matrix=matrix, half_set=half, kernel=kernel)


def fooling_function(points, spec: ClassSpec, box: FrequencyBox) -> FoolingCertificate:
    """
    The real unit-ball f of W^r_2 supported in the box, vanishing on every node, with the largest mean.

    The objective and constraints are linear in u and the feasible set is the unit
    ball cut by null(A), so the optimum is the normalized projection of e_0 onto
    null(A). The projection uses a pivoted QR of A^T; columns of R below
    rank_tol * |R_00| count as dependent.
    """
    constraints = fooling_constraints(points, spec, box)
    A = constraints.matrix
    e0 = np.zeros(constraints.n_params)
    e0[0] = 1.0
    rank = 0
    projection = e0
    if len(A):
        Q, R, _ = linalg.qr(A.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        if len(diag) and diag[0] > 0:
            rank = int(np.sum(diag > get_settings().rank_tol * diag[0]))
        Q1 = Q[:, :rank]
        projection = e0 - Q1 @ (Q1.T @ e0)
    norm = float(np.linalg.norm(projection))
    if norm <= get_settings().abs_tol:
        raise EmptyNullspaceError(
            f"no nonzero member of the box |k_j| <= {box.extent} vanishes on these {len(A)} nodes"
        )
    u = projection / norm
    f = constraints.to_polynomial(u)
    pts = np.asarray(points, dtype=float).reshape(-1, spec.d)
    residuals = float(np.max(np.abs(evaluate(f, pts)))) if len(pts) else 0.0
    logger.debug(f"fooling function on {len(pts)} nodes: integral {norm:.6g}, rank {rank}")
    return FoolingCertificate(f=f, points=pts, box=box, integral=float(u[0]), residuals=residuals,
                              class_norm_value=class_norm(f, spec), rank=rank)


def kappa_lower(points, spec: ClassSpec, box: FrequencyBox) -> float:
    """Fooling integral; 0 when only f = 0 vanishes on the nodes."""
    try:
        return fooling_function(points, spec, box).integral
    except EmptyNullspaceError:
        return 0.0


def l1_fooling_report(points, spec: ClassSpec, box: FrequencyBox, grid: int = 64) -> Dict[str, float]:
    """
    For a fooling f every weight vector gives er(f, L_1) = ||f||_1 >= I(f).

    Reports the certified I(f) and a grid estimate of ||f||_1.
    """
    certificate = fooling_function(points, spec, box)
    nodes = tensor_grid_rule(grid, spec.d)
    values = evaluate_on_lattice(certificate.f, nodes.numerators, nodes.denominator)
    return {"integral": certificate.integral, "l1_estimate": float(np.mean(np.abs(values))),
            "grid": grid, "residuals": certificate.residuals}


def _check_weights(rule: CubatureRule) -> None:
    if abs(rule.weight_sum - 1.0) > get_settings().abs_tol:
        raise DiscretizationError(f"{rule.rule_id}: weights sum to {rule.weight_sum}, not 1")


def _check_real(f: TrigPolynomial) -> None:
    if not f.is_real:
        raise DiscretizationError("the witness construction needs a real-valued function")


def _check_member(g: TrigPolynomial, spec: Optional[ClassSpec], label: str) -> None:
    if spec is None:
        return
    value = class_norm(g, spec)
    if value > 1.0 + MEMBERSHIP_TOL:
        raise MembershipError(f"{label} has class norm {value:.12g} > 1 in {spec.class_id}")


def shifted_pair(f: TrigPolynomial, rule: CubatureRule, spec: Optional[ClassSpec] = None) -> WitnessPair:
    """
    (f + 1)/2 and (f - 1)/2 with D_2(f+) - D_2(f-) = I(f) - Lambda(f).

    One of the two therefore has |D_2| >= |I(f) - Lambda(f)| / 2.
    """
    _check_real(f)
    _check_weights(rule)
    f_plus = (f + 1.0) * 0.5
    f_minus = (f - 1.0) * 0.5
    _check_member(f_plus, spec, "(f+1)/2")
    _check_member(f_minus, spec, "(f-1)/2")
    gap = (f.mean - apply_rule(rule, f)).real
    return WitnessPair(f_plus=f_plus, f_minus=f_minus,
                       defect_plus=signed_defect(f_plus, rule, 2),
                       defect_minus=signed_defect(f_minus, rule, 2),
                       integration_gap=gap, certified_er_lower=abs(gap) / 2.0)


def elimination_nodes(q: int) -> List[float]:
    return [-1.0 + 2.0 * i / (q - 1) for i in range(q)]


def elimination_witness(f: TrigPolynomial, rule: CubatureRule, q: int,
                        spec: Optional[ClassSpec] = None) -> EliminationCertificate:
    """
    Members c (f + t_i), c = 1/2, t_i = -1 + 2i/(q-1), i = 0..q-1.

    With w_i = 1 / prod_{j != i} (t_i - t_j), sum_i w_i (f + t_i)^q = q f because
    the divided difference kills powers of t below q-1 and the symmetric nodes kill
    t^q. Hence sum_i w_i D_q(c (f + t_i)) = q c^q (I(f) - Lambda(f)).
    """
    q = check_even_exponent(q)
    _check_real(f)
    _check_weights(rule)
    c = 0.5
    nodes = elimination_nodes(q)
    weights = [1.0 / math.prod(ti - tj for j, tj in enumerate(nodes) if j != i) for i, ti in enumerate(nodes)]
    defects = []
    for t in nodes:
        member = (f + t) * c
        _check_member(member, spec, f"c(f{t:+.4g})")
        defects.append(signed_defect(member, rule, q))
    gap = (f.mean - apply_rule(rule, f)).real
    combined = math.fsum(w * dv for w, dv in zip(weights, defects))
    target = q * c ** q * gap
    lower = q * c ** q * abs(gap) / math.fsum(abs(w) for w in weights)
    return EliminationCertificate(q=q, c=c, nodes=nodes, weights=weights, defects=defects,
                                  integration_gap=gap, identity_residual=abs(combined - target),
                                  certified_lower=lower)


def power_reduction_witness(f: TrigPolynomial, rule: CubatureRule, s: int, a: float,
                            spec: Optional[ClassSpec] = None) -> PowerChain:
    """
    Shifted pairs c_k (f^{2^k} +- 1), k = 0..s-1, with c_k = 1/(1 + a^{2^k - 1}).

    f^{2^k} lies in the a^{2^k - 1} ball, so both members stay in the unit ball;
    each stage satisfies D_2(f_k+) - D_2(f_k-) = 4 c_k^2 (I(f^{2^k}) - Lambda(f^{2^k})).
    The L_q bound for q = 2^s is c(s) |I(f) - Lambda(f)| / 2 with c(s) = c_0 ... c_{s-1};
    the elimination certificate for the same q is reported next to it.
    """
    if s < 1:
        raise DiscretizationError(f"s must be >= 1, got {s}")
    if a < 1:
        raise DiscretizationError(f"a quasi-algebra constant is at least 1, got {a}")
    _check_real(f)
    _check_weights(rule)
    stages = []
    for k in range(s):
        c_k = 1.0 / (1.0 + a ** (2 ** k - 1))
        g = power(f, 2 ** k)
        plus, minus = (g + 1.0) * c_k, (g - 1.0) * c_k
        _check_member(plus, spec, f"c_{k}(f^{2 ** k}+1)")
        _check_member(minus, spec, f"c_{k}(f^{2 ** k}-1)")
        d_plus, d_minus = signed_defect(plus, rule, 2), signed_defect(minus, rule, 2)
        power_gap = (g.mean - apply_rule(rule, g)).real
        residual = abs((d_plus - d_minus) - 4 * c_k ** 2 * power_gap)
        pair = WitnessPair(f_plus=plus, f_minus=minus, defect_plus=d_plus, defect_minus=d_minus,
                           integration_gap=power_gap, certified_er_lower=2 * c_k ** 2 * abs(power_gap))
        stages.append(ChainStage(k=k, c_k=c_k, pair=pair, power_gap=power_gap,
                                 stage_bound=2 * c_k ** 2 * abs(power_gap), identity_residual=residual))
    elimination = elimination_witness(f, rule, 2 ** s, spec)
    chain = PowerChain(s=s, a=a, stages=stages, elimination=elimination)
    logger.info(f"power chain s={s} on {rule.rule_id}: certified L_{2 ** s} lower "
                f"{chain.chain_lower:.6g} (elimination {chain.elimination_lower:.6g})")
    return chain
