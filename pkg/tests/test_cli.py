#!/usr/bin/env python3
"""
Test the command-line surface: exit codes and JSON output.
"""
import json

import pytest

from src.cli import EXIT_INVALID, EXIT_OK, build_parser, main
from src.discretization_service import DiscretizationService
from src.report_storage import ReportStorage


@pytest.fixture
def service():
    return DiscretizationService(ReportStorage(in_memory=True))


def run_cli(capsys, service, *argv):
    code = main(list(argv), service=service)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_rule_build(capsys, service):
    code, result = run_cli(capsys, service, "rule", "build", "--kind", "fibonacci", "--n", "4")
    assert code == EXIT_OK
    assert result["m"] == 5
    assert result["nodes"][1] == [[2, 5], [1, 5]]


def test_rule_quality(capsys, service):
    code, result = run_cli(capsys, service, "rule", "quality", "--kind", "rank1", "--m", "5", "--z", "1", "3",
                           "--class", "W", "--r", "1")
    assert code == EXIT_OK
    assert result["class_id"] == "W^1_2(d=2)"
    assert result["kappa"]["lo"] > 0


def test_rule_quality_enumeration(capsys, service):
    code, result = run_cli(capsys, service, "rule", "quality", "--kind", "fibonacci", "--n", "6",
                           "--class", "E", "--r", "2", "--method", "enumeration", "--precision", "32")
    assert code == EXIT_OK
    assert result["kappa"]["enumeration_limit"] == 32


def test_monte_carlo_quality_is_invalid(capsys, service):
    code, _ = run_cli(capsys, service, "rule", "quality", "--kind", "monte_carlo", "--m", "20", "--class", "W")
    assert code == EXIT_INVALID


def test_invalid_smoothness(capsys, service):
    code, _ = run_cli(capsys, service, "rule", "quality", "--kind", "fibonacci", "--n", "6",
                      "--class", "W", "--r", "0.4")
    assert code == EXIT_INVALID


def test_er_eval(capsys, service, tmp_path):
    poly = tmp_path / "f.json"
    poly.write_text(json.dumps({"d": 2, "coeffs": [[0, 0, 0.6, 0.0], [2, 1, 0.3, -0.2]]}))
    code, result = run_cli(capsys, service, "er", "eval", "--kind", "fibonacci", "--n", "4", "--poly", str(poly))
    assert code == EXIT_OK
    assert result["signed_defect"] == pytest.approx(-0.36, abs=1e-12)


def test_missing_poly_file(capsys, service, tmp_path):
    code, _ = run_cli(capsys, service, "er", "eval", "--kind", "fibonacci", "--n", "4",
                      "--poly", str(tmp_path / "missing.json"))
    assert code == EXIT_INVALID


def test_er_batch_writes_csv(capsys, service, tmp_path):
    paths = []
    for i, coeffs in enumerate([[[0, 0, 1.0, 0.0]], [[0, 0, 0.6, 0.0], [2, 1, 0.3, -0.2]]]):
        path = tmp_path / f"f{i}.json"
        path.write_text(json.dumps({"d": 2, "coeffs": coeffs}))
        paths.append(str(path))
    out_dir = tmp_path / "out"
    code, result = run_cli(capsys, service, "er", "batch", "--kind", "fibonacci", "--n", "4", "--class", "W",
                           "--poly", *paths, "--name", "pair", "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert result["records"][1]["signed_defect"] == pytest.approx(-0.36, abs=1e-12)
    rows = (out_dir / "pair.csv").read_text().splitlines()[2:]
    assert [float(row.split(",")[4]) for row in rows] == [r["signed_defect"] for r in result["records"]]


def test_witness(capsys, service):
    code, result = run_cli(capsys, service, "witness", "--kind", "rank1", "--m", "5", "--z", "1", "3",
                           "--class", "W")
    assert code == EXIT_OK
    assert result["er"] == pytest.approx(0.5, abs=1e-12)


def test_rate_fit_from_csv(capsys, service, tmp_path):
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("# errors\nm,e\n10,0.1\n100,0.01\n1000,0.001\n10000,0.0001\n")
    code, result = run_cli(capsys, service, "rate-fit", "--pairs", str(pairs), "--model", "power")
    assert code == EXIT_OK
    assert result["r_hat"] == pytest.approx(1.0)


def test_run(capsys, service, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "name": "cli-run",
        "class_spec": {"kind": "sobolev_mixed", "r": 1, "d": 2},
        "rule_family": {"kind": "fibonacci", "n_min": 6, "n_max": 9},
        "n_samples": 5,
    }))
    out_dir = tmp_path / "out"
    code, result = run_cli(capsys, service, "run", "--config", str(config), "--output-dir", str(out_dir))
    assert code == EXIT_OK
    assert result["all_passed"] is True
    first = (out_dir / "cli-run.csv").read_bytes()

    code, _ = run_cli(capsys, service, "run", "--config", str(config), "--output-dir", str(out_dir), "--seed", "0")
    assert code == EXIT_OK
    assert (out_dir / "cli-run.csv").read_bytes() == first


def test_run_with_empty_family(capsys, service, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "class_spec": {"kind": "korobov", "r": 2, "d": 2},
        "rule_family": {"kind": "korobov", "m_list": []},
    }))
    code, _ = run_cli(capsys, service, "run", "--config", str(config))
    assert code == EXIT_INVALID


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
