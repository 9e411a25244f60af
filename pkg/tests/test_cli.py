import json

import pytest

import spatialcrt.study as study_mod
from conftest import small_scenario
from spatialcrt.cli import main


def run_cli(args):
    return main(args)


class TestDesignCommand:
    def test_calculators(self, capsys):
        assert run_cli(["design", "--icc", "0.05"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["required_clusters"]["total_raw"] == 17
        assert payload["variance_partition"]["sigma_b2"] == pytest.approx(0.125)
        assert payload["design_effect"]["deff"] == pytest.approx(2.95)

    def test_scenario_table(self, capsys):
        assert run_cli(["design", "--table"]) == 0
        table = json.loads(capsys.readouterr().out)
        assert [row["label"] for row in table] == list("ABCDEF")

    def test_missing_icc_errors(self):
        with pytest.raises(SystemExit):
            run_cli(["design"])


class TestSimulateCommand:
    def test_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "trial.csv"
        assert run_cli(["simulate", "--scenario", "A", "--theta", "0.5",
                        "--seed", "4", "--out", str(out)]) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "id,cluster,sx,sy,z,x,y"
        assert len(lines) == 641

    def test_stdout_mode(self, capsys):
        assert run_cli(["simulate", "--scenario", "A", "--seed", "4",
                        "--out", "-"]) == 0
        assert capsys.readouterr().out.startswith("id,cluster")


@pytest.fixture
def study_config_path(tmp_path):
    config = {
        "scenarios": [small_scenario(rows=2, cols=2, m=5).to_dict()],
        "theta_grid": [0.0, 0.6],
        "models": ["fm_naive", "mm"],
        "reps": 3,
        "seed": 5,
    }
    path = tmp_path / "study.json"
    path.write_text(json.dumps(config))
    return path


class TestStudyCommand:
    def test_end_to_end(self, tmp_path, study_config_path, capsys):
        out_dir = tmp_path / "out"
        assert run_cli(["study", "--config", str(study_config_path),
                        "--out", str(out_dir), "--threads", "1"]) == 0
        assert (out_dir / "replicates.csv").exists()
        assert (out_dir / "summaries.json").exists()
        assert "study complete: 12 replicate rows" in capsys.readouterr().out

    def test_flag_overrides(self, tmp_path, study_config_path, capsys):
        out_dir = tmp_path / "out"
        assert run_cli(["study", "--config", str(study_config_path),
                        "--reps", "2", "--models", "fm_naive",
                        "--theta-grid", "0.0", "--threads", "1",
                        "--out", str(out_dir)]) == 0
        assert "2 replicate rows" in capsys.readouterr().out

    def test_env_thread_default(self, tmp_path, study_config_path, monkeypatch):
        seen = {}
        real = study_mod.run_study

        def spy(config, out_dir, threads=None, progress=None, resume=True):
            seen["threads"] = threads
            return real(config, out_dir, threads=1, progress=progress, resume=resume)

        import importlib
        app_mod = importlib.import_module("spatialcrt.service.app")
        monkeypatch.setattr(app_mod, "run_study", spy)
        monkeypatch.setenv("SPATIALCRT_THREADS", "7")
        run_cli(["study", "--config", str(study_config_path),
                 "--out", str(tmp_path / "a")])
        assert seen["threads"] == 7
        # explicit flag wins over the environment
        run_cli(["study", "--config", str(study_config_path),
                 "--out", str(tmp_path / "b"), "--threads", "3"])
        assert seen["threads"] == 3


class TestSummarizeAndExport:
    def test_roundtrip(self, tmp_path, study_config_path, capsys):
        out_dir = tmp_path / "out"
        run_cli(["study", "--config", str(study_config_path),
                 "--out", str(out_dir), "--threads", "1"])
        capsys.readouterr()

        summaries_path = tmp_path / "summaries_again.json"
        assert run_cli(["summarize", "--replicates", str(out_dir / "replicates.csv"),
                        "--out", str(summaries_path)]) == 0
        recomputed = json.loads(summaries_path.read_text())["summaries"]
        stored = json.loads((out_dir / "summaries.json").read_text())["summaries"]
        assert recomputed == stored

        plot_path = tmp_path / "power.csv"
        assert run_cli(["export-plotdata", "--summaries", str(summaries_path),
                        "--kind", "power", "--out", str(plot_path)]) == 0
        lines = plot_path.read_text().strip().split("\n")
        assert lines[0] == "scenario,model,theta,value,mc_se"
        assert len(lines) == 1 + 2 * 2  # two thetas x two models
