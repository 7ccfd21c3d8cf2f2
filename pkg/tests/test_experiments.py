#!/usr/bin/env python3
"""
Tests for rate fits and configured experiment runs.
"""
import math

import pytest
from pydantic import ValidationError

from src.errors import DegenerateFitError, ExperimentConfigError
from src.lattice_cubature import fibonacci_rule, korobov_search, rank1_rule
from src.experiments import (
    CSV_COLUMNS, optimal_rate, rate_fit, rate_label, reference_rate, run_experiment, worst_case_pairs,
)
from src.models import ClassKind, ClassSpec, ExperimentConfig, RateModel, RuleFamily, RuleFamilyKind
from src.report_storage import CSV_SCHEMA_HEADER, ReportStorage

W1_2D = ClassSpec(kind=ClassKind.SOBOLEV_MIXED, r=1, d=2)
E2_2D = ClassSpec(kind=ClassKind.KOROBOV, r=2, d=2)


def fibonacci_config(tmp_path, name="fib", **overrides):
    data = dict(name=name, class_spec=W1_2D,
                rule_family=RuleFamily(kind=RuleFamilyKind.FIBONACCI, n_min=6, n_max=12),
                q=2, n_samples=20, seed=0, output_dir=str(tmp_path))
    data.update(overrides)
    return ExperimentConfig(**data)


def test_rate_fit_recovers_power_law():
    pairs = [[m, 1.0 / m] for m in (10, 100, 1000, 10000)]
    fit = rate_fit(pairs)
    assert fit.r_hat == pytest.approx(1.0, abs=1e-8)
    assert fit.beta_hat == pytest.approx(0.0, abs=1e-8)
    assert fit.residual == pytest.approx(0.0, abs=1e-10)


def test_rate_fit_recovers_log_factor():
    pairs = [[m, math.sqrt(math.log(m)) / m] for m in (10, 50, 300, 2000, 10000)]
    fit = rate_fit(pairs, RateModel.LOG_POWER)
    assert fit.r_hat == pytest.approx(1.0, abs=1e-8)
    assert fit.beta_hat == pytest.approx(0.5, abs=1e-8)


def test_power_model_fixes_beta():
    pairs = [[m, 3.0 * m ** -0.5] for m in (10, 100, 1000, 10000)]
    fit = rate_fit(pairs, RateModel.POWER)
    assert fit.beta_hat == 0.0
    assert fit.r_hat == pytest.approx(0.5, abs=1e-10)
    assert math.exp(fit.c_hat) == pytest.approx(3.0, rel=1e-10)


def test_rate_fit_rejects_bad_input():
    with pytest.raises(ExperimentConfigError):
        rate_fit([[10, 0.1], [100, 0.01], [1000, 0.001]])
    with pytest.raises(ExperimentConfigError):
        rate_fit([[2, 0.5], [10, 0.1], [100, 0.01], [1000, 0.001]])
    with pytest.raises(ExperimentConfigError):
        rate_fit([[10, 0.1], [100, 0.0], [1000, 0.001], [10000, 1e-4]])
    with pytest.raises(DegenerateFitError):
        rate_fit([[10, 0.1]] * 4)


def test_fibonacci_worst_case_rate():
    """Fibonacci worst-case errors on W^1_2 decay like m^-1 (log m)^(1/2)."""
    pairs = worst_case_pairs([fibonacci_rule(n) for n in range(8, 25)], W1_2D)
    fit = rate_fit(pairs)
    assert fit.r_hat == pytest.approx(1.0, abs=0.1)
    assert fit.beta_hat == pytest.approx(0.5, abs=0.3)
    print(f"✅ Fibonacci fit: r={fit.r_hat:.3f}, beta={fit.beta_hat:.3f}")


def test_korobov_worst_case_rate():
    """Searched Korobov rules on E^2 in d=2 decay like m^-2 (log m)."""
    m_list = [101, 211, 401, 809]
    rules = [rank1_rule(korobov_search(m, E2_2D)) for m in m_list]
    pairs = worst_case_pairs(rules, E2_2D)
    _, beta = reference_rate(E2_2D, RuleFamilyKind.KOROBOV)
    fit = rate_fit([[m, e / math.log(m) ** beta] for m, e in pairs], RateModel.POWER)
    assert fit.r_hat == pytest.approx(2.0, abs=0.1)
    raw = rate_fit(pairs, RateModel.POWER)
    assert 1.7 <= raw.r_hat <= fit.r_hat
    print(f"✅ Korobov fit: r={fit.r_hat:.3f} after dividing by (log m)^{beta:g}, r={raw.r_hat:.3f} without")


def test_reference_rates():
    assert reference_rate(W1_2D, RuleFamilyKind.FIBONACCI) == (1, 0.5)
    assert reference_rate(E2_2D, RuleFamilyKind.FIBONACCI) == (2, 1.0)
    assert reference_rate(W1_2D, RuleFamilyKind.MONTE_CARLO) == (0.5, 0.0)
    w3 = ClassSpec(kind=ClassKind.SOBOLEV_MIXED, r=2, d=3)
    assert reference_rate(w3, RuleFamilyKind.KOROBOV) == (2, 4)
    assert optimal_rate(w3) == (2, 1.0)
    assert rate_label(1, 0.5) == "m^-1 (log m)^0.5"
    assert rate_label(0.5, 0) == "m^-0.5"


def test_run_fibonacci_experiment(tmp_path):
    report = run_experiment(fibonacci_config(tmp_path))
    assert report.all_passed
    assert [row.m for row in report.rows] == [13, 21, 34, 55, 89, 144, 233]
    for row in report.rows:
        assert row.kappa_lo <= row.kappa_hi
        assert row.witness_er <= row.empirical_sup <= row.bound + 1e-10
        assert row.certified_lower <= row.bound + 1e-10
    assert "kappa_hi" in report.fits
    assert report.reference_model == "m^-1 (log m)^0.5"

    lines = (tmp_path / "fib.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == CSV_SCHEMA_HEADER
    assert lines[1] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2 + len(report.rows)
    assert lines[2].endswith(",true")
    assert (tmp_path / "fib.json").exists()


def test_run_is_reproducible(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    run_experiment(fibonacci_config(first, n_samples=10))
    run_experiment(fibonacci_config(second, n_samples=10))
    assert (first / "fib.csv").read_bytes() == (second / "fib.csv").read_bytes()


def test_run_monte_carlo_experiment(tmp_path):
    config = ExperimentConfig(
        name="mc", class_spec=W1_2D,
        rule_family=RuleFamily(kind=RuleFamilyKind.MONTE_CARLO, m_list=[60, 30], trials=2),
        n_samples=10, output_dir=str(tmp_path),
    )
    report = run_experiment(config, ReportStorage(in_memory=True))
    assert report.all_passed
    assert [row.m for row in report.rows] == [30, 30, 60, 60]
    assert all(row.kappa_lo == row.kappa_hi for row in report.rows)
    assert report.rows[-1].fooling_integral == 0.0
    assert report.csv_path is None


def test_run_korobov_experiment(tmp_path):
    config = ExperimentConfig(
        name="korobov", class_spec=E2_2D,
        rule_family=RuleFamily(kind=RuleFamilyKind.KOROBOV, m_list=[13, 5, 11, 7]),
        n_samples=10, output_dir=str(tmp_path),
    )
    report = run_experiment(config)
    assert report.all_passed
    assert [row.m for row in report.rows] == [5, 7, 11, 13]
    assert all(row.certified_lower is None for row in report.rows)
    lines = (tmp_path / "korobov.csv").read_text(encoding="utf-8").splitlines()
    # empty cells for the fooling columns of a Korobov class
    assert ",,,true" in lines[2] or ",,,false" in lines[2]


def test_empty_family_is_invalid():
    with pytest.raises(ValidationError):
        RuleFamily(kind=RuleFamilyKind.KOROBOV, m_list=[])
    with pytest.raises(ValidationError):
        RuleFamily(kind=RuleFamilyKind.FIBONACCI, n_min=8, n_max=6)


def test_invalid_config_writes_nothing(tmp_path):
    config = ExperimentConfig(
        name="bad", class_spec=W1_2D,
        rule_family=RuleFamily(kind=RuleFamilyKind.KOROBOV, m_list=[10]),
        output_dir=str(tmp_path / "out"),
    )
    with pytest.raises(ExperimentConfigError):
        run_experiment(config)
    assert not (tmp_path / "out").exists()


def test_quasi_box_must_cover_support(tmp_path):
    with pytest.raises(ExperimentConfigError):
        run_experiment(fibonacci_config(tmp_path, quasi_box_limit=4))


def test_odd_q_is_rejected(tmp_path):
    with pytest.raises(ValidationError):
        fibonacci_config(tmp_path, q=3)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
