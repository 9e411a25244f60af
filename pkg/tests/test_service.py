import time

import pytest
from fastapi.testclient import TestClient

from conftest import small_scenario
from spatialcrt.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def tiny_study_config(reps=3):
    return {
        "scenarios": [small_scenario(rows=2, cols=2, m=5).to_dict()],
        "theta_grid": [0.0, 0.6],
        "models": ["fm_naive", "mm"],
        "reps": reps,
        "seed": 5,
    }


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["version"]


class TestDesignEndpoints:
    def test_required_clusters_matches_paper_counts(self, client):
        for icc, expected in ((0.05, 17), (0.15, 39), (0.25, 61)):
            resp = client.post("/design/required-clusters",
                               json={"theta": 0.6, "icc": icc})
            assert resp.status_code == 200
            assert resp.json()["total_raw"] == expected

    def test_variance_partition(self, client):
        body = client.post("/design/variance-partition", json={"icc": 0.05}).json()
        assert body["sigma_b2"] == pytest.approx(0.125)
        assert body["tau2"] == pytest.approx(0.125)
        assert body["icc"] == pytest.approx(0.05)

    def test_design_effect(self, client):
        body = client.post("/design/design-effect", json={"m": 40, "icc": 0.05}).json()
        assert body["deff"] == pytest.approx(2.95)

    def test_scenarios_table(self, client):
        body = client.get("/design/scenarios").json()
        assert [s["label"] for s in body] == list("ABCDEF")
        assert body[0]["phi"] == 1.5

    def test_invalid_input_is_422(self, client):
        resp = client.post("/design/variance-partition", json={"icc": 0.6, "f": 0.5})
        assert resp.status_code == 422


class TestSimulate:
    def test_csv_payload(self, client):
        resp = client.post("/simulate", json={"scenario": "A", "theta": 0.5, "seed": 3})
        assert resp.status_code == 200
        body = resp.json()
        assert body["n"] == 640
        assert body["n_clusters"] == 16
        lines = body["csv"].strip().split("\n")
        assert lines[0] == "id,cluster,sx,sy,z,x,y"
        assert len(lines) == 641

    def test_deterministic_for_seed(self, client):
        a = client.post("/simulate", json={"scenario": "A", "seed": 9}).json()
        b = client.post("/simulate", json={"scenario": "A", "seed": 9}).json()
        assert a["csv"] == b["csv"]

    def test_inline_scenario_and_latent(self, client):
        resp = client.post("/simulate", json={
            "scenario": small_scenario(rows=2, cols=2, m=3).to_dict(),
            "include_latent": True, "seed": 1})
        body = resp.json()
        assert body["n"] == 12
        assert body["csv"].split("\n", 1)[0].endswith("u,w,eps")

    def test_unknown_scenario(self, client):
        assert client.post("/simulate", json={"scenario": "Z"}).status_code == 422


class TestFit:
    def test_fit_small_scenario(self, client):
        resp = client.post("/fit", json={
            "scenario": small_scenario(rows=2, cols=2, m=6).to_dict(),
            "theta": 0.4, "seed": 2, "models": ["fm_naive", "mm", "cluster"]})
        assert resp.status_code == 200
        body = resp.json()
        assert [f["model"] for f in body["fits"]] == ["fm_naive", "mm", "cluster"]
        for f in body["fits"]:
            assert f["ci_lo"] < f["post_mean"] < f["ci_hi"]
            assert 0.0 <= f["prob_exceeds"] <= 1.0
            assert f["rejected"] == (f["prob_exceeds"] > 0.95)
            weights = sum(c["weight"] for c in f["components"])
            assert weights == pytest.approx(1.0, abs=1e-9)


class TestStudies:
    def test_blocking_run(self, client, tmp_path):
        resp = client.post("/studies/run", json={
            "config": tiny_study_config(), "out_dir": str(tmp_path / "out"),
            "threads": 1})
        assert resp.status_code == 200
        body = resp.json()
        assert body["n_rows"] == 2 * 3 * 2
        assert (tmp_path / "out" / "replicates.csv").exists()
        assert (tmp_path / "out" / "summaries.json").exists()
        assert len(body["summaries"]) == 4

    def test_background_job_lifecycle(self, client, tmp_path):
        resp = client.post("/studies", json={
            "config": tiny_study_config(reps=2), "out_dir": str(tmp_path / "job"),
            "threads": 1})
        assert resp.status_code == 202
        job_id = resp.json()["job_id"]
        for _ in range(200):
            status = client.get(f"/studies/{job_id}").json()
            if status["status"] in ("done", "failed"):
                break
            time.sleep(0.05)
        assert status["status"] == "done"
        assert status["done_replicates"] == status["total_replicates"] == 4
        summaries = client.get(f"/studies/{job_id}/summaries").json()["summaries"]
        assert len(summaries) == 4
        csv_text = client.get(f"/studies/{job_id}/replicates").text
        assert csv_text.startswith("scenario,")

    def test_unknown_job(self, client):
        assert client.get("/studies/deadbeef").status_code == 404


class TestSummarizeAndPlotdata:
    def test_summarize_roundtrip(self, client, tmp_path):
        run = client.post("/studies/run", json={
            "config": tiny_study_config(), "out_dir": str(tmp_path / "s"),
            "threads": 1}).json()
        csv_text = (tmp_path / "s" / "replicates.csv").read_text()
        resp = client.post("/summarize", json={"replicates_csv": csv_text})
        assert resp.status_code == 200
        assert resp.json()["summaries"] == run["summaries"]

    def test_plotdata_export(self, client, tmp_path):
        run = client.post("/studies/run", json={
            "config": tiny_study_config(), "out_dir": str(tmp_path / "p"),
            "threads": 1}).json()
        resp = client.post("/plotdata", json={"summaries": run["summaries"],
                                              "kind": "fpr"})
        lines = resp.json()["csv"].strip().split("\n")
        assert lines[0] == "scenario,model,theta,value,mc_se"
        # one row per model at theta = 0
        assert len(lines) == 1 + 2
