#!/usr/bin/env python3
"""
Test the Sampling Discretization API endpoints in-process.
"""
import pytest
from fastapi.testclient import TestClient

from src import main as api
from src.discretization_service import DiscretizationService
from src.report_storage import ReportStorage

W1 = {"kind": "sobolev_mixed", "r": 1, "d": 2}
E2 = {"kind": "korobov", "r": 2, "d": 2}


@pytest.fixture
def client(monkeypatch, tmp_path):
    service = DiscretizationService(ReportStorage(in_memory=True), output_root=str(tmp_path))
    monkeypatch.setattr(api, "service", service)
    return TestClient(api.app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy", "service": "sampling-discretization"}
    root = client.get("/").json()
    assert root["name"] == "Sampling Discretization API"


def test_build_fibonacci_rule(client):
    response = client.post("/rules/build", json={"kind": "fibonacci", "n": 4})
    assert response.status_code == 200
    rule = response.json()
    assert rule["m"] == 5
    assert rule["rule_id"] == "fibonacci(n=4)"
    assert rule["nodes"][0] == [[1, 5], [3, 5]]
    print("✅ Fibonacci rule built with exact rational nodes")


def test_build_needs_parameters(client):
    response = client.post("/rules/build", json={"kind": "rank1"})
    assert response.status_code == 400
    assert "m" in response.json()["detail"]


def test_rule_quality(client):
    body = {"rule": {"kind": "rank1", "m": 5, "z": [1, 3]}, "class_spec": W1}
    result = client.post("/rules/quality", json=body).json()
    assert result["kappa"]["method"] == "closed_form"
    assert result["kappa"]["lo"] <= result["kappa"]["hi"]


def test_rule_quality_rejects_monte_carlo(client):
    body = {"rule": {"kind": "monte_carlo", "m": 20}, "class_spec": W1}
    response = client.post("/rules/quality", json=body)
    assert response.status_code == 400


def test_rule_quality_runs_korobov_search(client):
    body = {"rule": {"kind": "rank1", "m": 13}, "class_spec": W1}
    result = client.post("/rules/quality", json=body).json()
    assert result["generator"][0] == 1
    assert len(result["generator"]) == 2


def test_er_eval_constant(client):
    body = {"rule": {"kind": "fibonacci", "n": 6}, "polynomial": {"d": 2, "coeffs": [[0, 0, 1.0, 0.0]]}, "q": 4}
    result = client.post("/er/eval", json=body).json()
    assert result["er_abs"] == pytest.approx(0.0, abs=1e-14)


def test_er_eval_odd_q(client):
    body = {"rule": {"kind": "fibonacci", "n": 6}, "polynomial": {"d": 2, "coeffs": [[0, 0, 1.0, 0.0]]}, "q": 3}
    assert client.post("/er/eval", json=body).status_code == 400


def test_er_batch(client, tmp_path):
    polynomials = [{"d": 2, "coeffs": [[0, 0, 1.0, 0.0]]},
                   {"d": 2, "coeffs": [[0, 0, 0.6, 0.0], [2, 1, 0.3, -0.2]]}]
    body = {"rule": {"kind": "fibonacci", "n": 4}, "class_spec": W1, "polynomials": polynomials,
            "name": "batch", "output_dir": "er"}
    result = client.post("/er/batch", json=body).json()
    assert [r["f_id"] for r in result["records"]] == ["f0", "f1"]
    assert result["records"][0]["er_abs"] == pytest.approx(0.0, abs=1e-14)
    assert result["records"][1]["signed_defect"] == pytest.approx(-0.36, abs=1e-12)
    lines = (tmp_path / "er" / "batch.csv").read_text().splitlines()
    assert lines[1] == "rule_id,class,q,m,signed_defect,er_abs"
    assert len(lines) == 4


def test_er_batch_rejects_escaping_output_dir(client):
    body = {"rule": {"kind": "fibonacci", "n": 4}, "class_spec": W1,
            "polynomials": [{"d": 2, "coeffs": [[0, 0, 1.0, 0.0]]}], "output_dir": "../.."}
    assert client.post("/er/batch", json=body).status_code == 400


def test_er_bound(client):
    body = {"rule": {"kind": "fibonacci", "n": 8}, "class_spec": W1, "q": 2, "quasi_box_limit": 256}
    result = client.post("/er/bound", json=body).json()
    bound = result["bound"]
    assert bound["value"] == pytest.approx(bound["quasi_algebra_constant"] * bound["kappa"]["hi"])
    assert result["quasi_algebra"]["n_limit"] == 6


def test_witness(client):
    for spec in (W1, E2):
        body = {"rule": {"kind": "rank1", "m": 5, "z": [1, 3]}, "class_spec": spec}
        result = client.post("/witness", json=body).json()
        assert result["er"] == pytest.approx(0.5, abs=1e-12)


def test_fool(client):
    body = {"rule": {"kind": "fibonacci", "n": 7}, "class_spec": W1, "box_limit": 3, "q": 4}
    result = client.post("/fool", json=body).json()
    assert result["certificate"]["residuals"] <= 1e-10
    assert result["all_passed"] is True
    assert result["elimination"]["q"] == 4


def test_fool_rejects_korobov_class(client):
    body = {"rule": {"kind": "fibonacci", "n": 7}, "class_spec": E2}
    assert client.post("/fool", json=body).status_code == 400


def test_mc_experiment(client):
    body = {"class_spec": W1, "box_limit": 1, "m_list": [20, 40], "trials": 4, "family_size": 2,
            "eta_grid": [0.5], "seed": 3}
    result = client.post("/mc-experiment", json=body).json()
    assert [row["m"] for row in result["rows"]] == [20, 40]
    assert result["all_passed"] is True


def test_rate_fit(client):
    body = {"pairs": [[10, 0.1], [100, 0.01], [1000, 0.001], [10000, 0.0001]], "model": "power"}
    result = client.post("/rate-fit", json=body).json()
    assert result["r_hat"] == pytest.approx(1.0)


def test_run(client, tmp_path):
    config = {"name": "api-run", "class_spec": W1,
              "rule_family": {"kind": "fibonacci", "n_min": 6, "n_max": 9},
              "n_samples": 5, "output_dir": "runs"}
    result = client.post("/run", json=config).json()
    assert result["all_passed"] is True
    assert len(result["rows"]) == 4
    assert (tmp_path / "runs" / "api-run.csv").exists()


@pytest.mark.parametrize("output_dir", ["../escaped", "/tmp/elsewhere", "runs/../../escaped"])
def test_run_stays_inside_report_dir(client, tmp_path, output_dir):
    config = {"name": "api-run", "class_spec": W1,
              "rule_family": {"kind": "fibonacci", "n_min": 6, "n_max": 7},
              "n_samples": 1, "output_dir": output_dir}
    response = client.post("/run", json=config)
    assert response.status_code == 400
    assert "outside" in response.json()["detail"]
    assert not (tmp_path.parent / "escaped").exists()


def test_report_name_cannot_be_a_path(client):
    config = {"name": "../api-run", "class_spec": W1,
              "rule_family": {"kind": "fibonacci", "n_min": 6, "n_max": 7}}
    assert client.post("/run", json=config).status_code == 422


def test_invalid_class_is_unprocessable(client):
    body = {"rule": {"kind": "fibonacci", "n": 6}, "class_spec": {"kind": "sobolev_mixed", "r": 0.4, "d": 2}}
    assert client.post("/rules/quality", json=body).status_code == 422


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
