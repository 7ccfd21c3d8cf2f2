#!/usr/bin/env python3
"""
Tests for fooling functions, shifted pairs, the elimination witness and the power chain.
"""
import numpy as np
import pytest
from scipy import linalg

from src.errors import EmptyNullspaceError, InvalidClassError, MembershipError
from src.fourier_core import (
    TrigPolynomial, class_norm, evaluate, quasi_algebra_constant, random_unit_ball_sample,
)
from src.lattice_cubature import (
    apply_rule, fibonacci_rule, monte_carlo_rule, rank1_rule, tensor_grid_rule, worst_case_error,
)
from src.lower_bounds import (
    elimination_nodes, elimination_witness, fooling_constraints, fooling_function, kappa_lower,
    l1_fooling_report, power_reduction_witness, shifted_pair,
)
from src.models import ClassKind, ClassSpec, FrequencyBox, Rank1Generator

W1_2D = ClassSpec(kind=ClassKind.SOBOLEV_MIXED, r=1, d=2)
FOOLING_BOX = FrequencyBox.tensor(2, 4)


@pytest.fixture(scope="module")
def fooling_21():
    """Fooling certificate on the 21 Fibonacci nodes, frequencies |k_j| <= 4."""
    rule = fibonacci_rule(7)
    return rule, fooling_function(rule.nodes, W1_2D, FOOLING_BOX)


def test_no_nodes_gives_constant():
    certificate = fooling_function(np.zeros((0, 2)), W1_2D, FrequencyBox.tensor(2, 2))
    assert certificate.integral == pytest.approx(1.0)
    assert certificate.f.coefficient((0, 0)) == pytest.approx(1.0)
    assert certificate.rank == 0


def test_fooling_certificate(fooling_21):
    rule, certificate = fooling_21
    assert certificate.residuals <= 1e-10
    assert certificate.class_norm_value == pytest.approx(1.0, abs=1e-10)
    assert certificate.integral > 0
    assert certificate.f.is_real
    assert certificate.integral <= worst_case_error(rule, W1_2D).hi + 1e-12
    print(f"✅ fooling integral on {rule.rule_id}: {certificate.integral:.6g}")


def test_fooling_function_is_optimal(fooling_21):
    """No feasible unit vector has a larger zeroth coordinate."""
    rule, certificate = fooling_21
    constraints = fooling_constraints(rule.nodes, W1_2D, FOOLING_BOX)
    basis = linalg.null_space(constraints.matrix)
    rng = np.random.default_rng(0)
    candidates = rng.standard_normal((10_000, basis.shape[1])) @ basis.T
    candidates /= np.linalg.norm(candidates, axis=1, keepdims=True)
    assert np.max(candidates[:, 0]) <= certificate.integral + 1e-12


def test_fooling_ignores_node_order(fooling_21):
    rule, certificate = fooling_21
    shuffled = np.random.default_rng(1).permutation(rule.nodes)
    again = fooling_function(shuffled, W1_2D, FOOLING_BOX)
    assert again.integral == pytest.approx(certificate.integral, abs=1e-10)


def test_resolving_grid_has_empty_nullspace():
    grid = tensor_grid_rule(9, 2)
    box = FrequencyBox.tensor(2, 4)
    with pytest.raises(EmptyNullspaceError):
        fooling_function(grid.nodes, W1_2D, box)
    assert kappa_lower(grid.nodes, W1_2D, box) == 0.0


def test_kappa_lower_vanishes_once_box_is_resolved():
    box = FrequencyBox.tensor(2, 2)
    assert kappa_lower(fibonacci_rule(5).nodes, W1_2D, box) > 0
    assert kappa_lower(fibonacci_rule(12).nodes, W1_2D, box) == 0.0


def test_fooling_needs_sobolev_class():
    with pytest.raises(InvalidClassError):
        fooling_function(np.zeros((1, 2)), ClassSpec(kind=ClassKind.KOROBOV, r=2, d=2), FrequencyBox.tensor(2, 2))


def test_l1_fooling_report(fooling_21):
    rule, certificate = fooling_21
    report = l1_fooling_report(rule.nodes, W1_2D, FOOLING_BOX)
    assert report["integral"] == pytest.approx(certificate.integral)
    assert report["l1_estimate"] >= report["integral"] - 1e-12


def test_shifted_pair_of_constant():
    pair = shifted_pair(TrigPolynomial.constant(2), fibonacci_rule(6))
    assert pair.defect_plus == pytest.approx(0.0, abs=1e-14)
    assert pair.defect_minus == pytest.approx(0.0, abs=1e-14)
    assert pair.certified_er_lower == pytest.approx(0.0, abs=1e-14)


def test_shifted_pair_identity():
    rules = [fibonacci_rule(6), rank1_rule(Rank1Generator(m=11, z=[1, 4])), monte_carlo_rule(30, 2, seed=5)]
    box = FrequencyBox.tensor(2, 2)
    for seed in range(100):
        f = random_unit_ball_sample(W1_2D, box, seed=seed, real_valued=True)
        for rule in rules:
            pair = shifted_pair(f, rule)
            assert abs((pair.defect_plus - pair.defect_minus) - pair.integration_gap) <= 1e-10
            assert max(abs(pair.defect_plus), abs(pair.defect_minus)) >= pair.certified_er_lower - 1e-12


def test_shifted_pair_on_fooling_function(fooling_21):
    rule, certificate = fooling_21
    pair = shifted_pair(certificate.f, rule, W1_2D)
    assert abs(apply_rule(rule, certificate.f)) <= 1e-10
    assert pair.certified_er_lower == pytest.approx(certificate.integral / 2, abs=1e-9)
    assert class_norm(pair.f_plus, W1_2D) <= 1 + 1e-10


def test_shifted_pair_rejects_non_member(fooling_21):
    rule, certificate = fooling_21
    with pytest.raises(MembershipError):
        shifted_pair(certificate.f * 3.0, rule, W1_2D)


def test_elimination_nodes():
    assert elimination_nodes(2) == [-1.0, 1.0]
    assert elimination_nodes(4) == pytest.approx([-1.0, -1 / 3, 1 / 3, 1.0])


def test_elimination_q2_matches_shifted_pair(fooling_21):
    rule, certificate = fooling_21
    pair = shifted_pair(certificate.f, rule, W1_2D)
    elimination = elimination_witness(certificate.f, rule, 2, W1_2D)
    assert elimination.certified_lower == pytest.approx(pair.certified_er_lower, rel=1e-12)


def test_elimination_q4(fooling_21):
    rule, certificate = fooling_21
    elimination = elimination_witness(certificate.f, rule, 4, W1_2D)
    assert sum(abs(w) for w in elimination.weights) == pytest.approx(4.5)
    assert elimination.certified_lower == pytest.approx(abs(elimination.integration_gap) / 18, rel=1e-12)
    assert elimination.identity_residual <= 1e-9
    assert elimination.best_defect >= elimination.certified_lower - 1e-12


def test_power_chain(fooling_21):
    rule, certificate = fooling_21
    # f^2 is supported in |k_j| <= 8
    a = quasi_algebra_constant(W1_2D, 8, FrequencyBox.tensor(2, 64)).constant
    chain = power_reduction_witness(certificate.f, rule, 2, a, W1_2D)
    assert chain.q == 4
    assert len(chain.stages) == 2
    assert chain.stages[0].c_k == pytest.approx(0.5)
    assert chain.stages[1].c_k == pytest.approx(1 / (1 + a))
    for stage in chain.stages:
        assert stage.identity_residual <= 1e-9
        assert class_norm(stage.pair.f_plus, W1_2D) <= 1 + 1e-10
        assert class_norm(stage.pair.f_minus, W1_2D) <= 1 + 1e-10
        assert max(abs(stage.pair.defect_plus), abs(stage.pair.defect_minus)) >= stage.stage_bound - 1e-12

    c0, c1 = chain.stages[0].c_k, chain.stages[1].c_k
    assert chain.c_s == pytest.approx(c0 * c1)
    assert chain.chain_lower == pytest.approx(c0 * c1 * certificate.integral / 2, abs=1e-9)
    assert chain.certified_lq_lower == chain.chain_lower
    assert chain.elimination_lower == pytest.approx(abs(chain.integration_gap) / 18, rel=1e-12)
    assert chain.elimination.best_defect >= chain.chain_lower

    payload = chain.to_payload()
    assert payload["c_s"] == chain.c_s
    assert payload["chain_lower"] == payload["certified_lq_lower"]
    assert payload["elimination_lower"] == chain.elimination_lower
    print(f"✅ L_4 chain bound {chain.chain_lower:.6g}, elimination bound {chain.elimination_lower:.6g}")


def test_power_chain_first_stage_is_shifted_pair(fooling_21):
    rule, certificate = fooling_21
    chain = power_reduction_witness(certificate.f, rule, 1, 1.0, W1_2D)
    pair = shifted_pair(certificate.f, rule, W1_2D)
    assert chain.stages[0].pair.defect_plus == pytest.approx(pair.defect_plus, abs=1e-14)
    assert chain.stages[0].stage_bound == pytest.approx(pair.certified_er_lower, rel=1e-12)


def test_fooling_function_values_vanish(fooling_21):
    rule, certificate = fooling_21
    assert np.max(np.abs(evaluate(certificate.f, rule.nodes))) <= 1e-10


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
