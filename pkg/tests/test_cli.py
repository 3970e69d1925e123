"""End-to-end pipeline orchestration: config parsing, stage chaining,
determinism across reruns, flag overrides, and the machine-readable failure
contract."""
from __future__ import annotations

import json

import pytest

from tlsa import cli
from tlsa.errors import ConfigError

from conftest import make_clusters, write_fixture

CHAINED_ARTIFACTS = [
    cli.VOTES_FILE,
    cli.DISCOVERED_FILE,
    cli.FILTERED_FILE,
    cli.BANK_FILE,
    cli.CP_FILE,
    cli.REPORT_FILE,
    cli.PREDICTIONS_FILE,
    cli.METRICS_FILE,
]


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """One fully written fixture plus a completed `run` into root/out."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = write_fixture(make_clusters(0), root)
    assert cli.main(["run", "--config", str(cfg_path)]) == 0
    return root


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line]


class TestLoadConfig:
    def test_paths_resolve_relative_to_config_dir(self, tmp_path):
        cfg_path = write_fixture(make_clusters(0, per_cluster=2), tmp_path)
        cfg = cli.load_config(cfg_path)
        assert cfg.captions == tmp_path / "captions.jsonl"
        assert cfg.out_dir == tmp_path / "out"

    def test_unknown_pipeline_key_rejected(self, tmp_path):
        cfg_path = write_fixture(
            make_clusters(0, per_cluster=2), tmp_path, pipeline_lines=["kk = 3"]
        )
        with pytest.raises(ConfigError, match="kk"):
            cli.load_config(cfg_path)

    def test_unknown_top_level_section_rejected(self, tmp_path):
        cfg_path = tmp_path / "config.toml"
        cfg_path.write_text('[paths]\nout_dir = "out"\n[extras]\nx = 1\n')
        with pytest.raises(ConfigError, match="extras"):
            cli.load_config(cfg_path)

    def test_unknown_selftrain_key_rejected(self, tmp_path):
        cfg_path = write_fixture(
            make_clusters(0, per_cluster=2), tmp_path, selftrain_lines=["warmup = 3"]
        )
        with pytest.raises(ConfigError, match="warmup"):
            cli.load_config(cfg_path)

    def test_flag_overrides_beat_toml(self, tmp_path):
        cfg_path = write_fixture(
            make_clusters(0, per_cluster=2), tmp_path, pipeline_lines=["k = 9"]
        )
        assert cli.load_config(cfg_path).k == 9
        assert cli.load_config(cfg_path, k=3).k == 3

    def test_selftrain_defaults_and_period_zero(self, tmp_path):
        cfg_path = write_fixture(
            make_clusters(0, per_cluster=2),
            tmp_path,
            selftrain_lines=["iterations = 7", "teacher_update_period = 0"],
        )
        cfg = cli.load_config(cfg_path)
        assert cfg.selftrain_enabled is True
        assert cfg.selftrain.iterations == 7
        # 0 in TOML means the teacher never updates
        assert cfg.selftrain.teacher_update_period is None

    def test_selftrain_can_be_disabled_in_place(self, tmp_path):
        cfg_path = write_fixture(
            make_clusters(0, per_cluster=2),
            tmp_path,
            selftrain_lines=["enabled = false", "iterations = 7"],
        )
        cfg = cli.load_config(cfg_path)
        assert cfg.selftrain_enabled is False
        assert cfg.selftrain is not None  # config kept for explicit stage calls

    def test_missing_out_dir_rejected(self, tmp_path):
        cfg_path = tmp_path / "config.toml"
        cfg_path.write_text('[paths]\ncaptions = "c.jsonl"\n')
        with pytest.raises(ConfigError, match="out_dir"):
            cli.load_config(cfg_path)

    def test_k_below_two_rejected(self, tmp_path):
        cfg_path = write_fixture(make_clusters(0, per_cluster=2), tmp_path)
        with pytest.raises(ConfigError, match="k must be"):
            cli.load_config(cfg_path, k=1)


class TestFailureContract:
    def test_missing_input_fails_before_compute(self, tmp_path, capsys):
        cfg_path = write_fixture(make_clusters(0, per_cluster=2), tmp_path)
        (tmp_path / "synonyms.syn").unlink()
        rc = cli.main(["align", "--config", str(cfg_path)])
        err = capsys.readouterr().err
        assert rc == 2
        payload = json.loads(err.strip().splitlines()[-1])
        assert payload["stage"] == "align"
        assert payload["error"] == "ConfigError"
        assert "synonyms" in payload["message"]
        # the input check runs before anything is computed or written
        assert not (tmp_path / "out").exists()

    def test_bad_toml_reports_config_stage(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.toml"
        cfg_path.write_text("not toml [")
        rc = cli.main(["discover", "--config", str(cfg_path)])
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert rc == 2
        assert payload["stage"] == "config"

    def test_unknown_toml_key_exits_two(self, tmp_path, capsys):
        cfg_path = write_fixture(
            make_clusters(0, per_cluster=2), tmp_path, pipeline_lines=["typo = 1"]
        )
        rc = cli.main(["discover", "--config", str(cfg_path)])
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert rc == 2
        assert "typo" in payload["message"]

    def test_missing_upstream_artifact_exits_two(self, tmp_path, capsys):
        cfg_path = write_fixture(make_clusters(0, per_cluster=2), tmp_path)
        rc = cli.main(["evaluate", "--config", str(cfg_path)])
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert rc == 2
        assert "predictions.jsonl" in payload["message"]

    def test_selftrain_without_section_exits_two(self, tmp_path, capsys):
        cfg_path = write_fixture(make_clusters(0, per_cluster=2), tmp_path)
        rc = cli.main(["selftrain", "--config", str(cfg_path)])
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert rc == 2
        assert "selftrain" in payload["message"]


class TestPipelineRun:
    def test_run_writes_every_artifact(self, pipeline_dir):
        out = pipeline_dir / "out"
        for name in CHAINED_ARTIFACTS:
            assert (out / name).is_file(), name

    def test_run_recovers_the_synthetic_split(self, pipeline_dir):
        out = pipeline_dir / "out"
        # discovery is exact, so the surviving private set is the private
        # pool and every score is perfect
        assert (out / cli.CP_FILE).read_text().split() == ["kettle", "lamp", "piano"]
        scores = json.loads((out / cli.METRICS_FILE).read_text())
        assert scores["mode"] == "h"
        assert scores["acc_common"] == 1.0
        assert scores["acc_private"] == 1.0
        assert scores["nmi"] == 1.0
        assert scores["h_score"] == 1.0
        assert scores["h3_score"] == 1.0

    def test_chained_stages_match_monolithic_run(self, pipeline_dir, capsys):
        cfg = pipeline_dir / "config.toml"
        out_b = pipeline_dir / "chained"
        for stage in ("discover", "align", "refine", "predict", "evaluate"):
            assert cli.main([stage, "--config", str(cfg), "--out", str(out_b)]) == 0
        capsys.readouterr()
        for name in CHAINED_ARTIFACTS:
            a = (pipeline_dir / "out" / name).read_bytes()
            b = (out_b / name).read_bytes()
            assert a == b, f"{name} differs between chained and monolithic runs"

    def test_rerun_is_byte_identical(self, pipeline_dir, capsys):
        cfg = pipeline_dir / "config.toml"
        out_b = pipeline_dir / "rerun"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out_b)]) == 0
        capsys.readouterr()
        for name in CHAINED_ARTIFACTS:
            a = (pipeline_dir / "out" / name).read_bytes()
            b = (out_b / name).read_bytes()
            assert a == b, f"{name} differs between identical reruns"

    def test_refine_reuses_a_saved_bank(self, pipeline_dir, capsys):
        cfg = pipeline_dir / "config.toml"
        bank = pipeline_dir / "out" / cli.BANK_FILE
        out_c = pipeline_dir / "rebank"
        rc = cli.main(
            ["refine", "--config", str(cfg), "--out", str(out_c), "--bank", str(bank)]
        )
        capsys.readouterr()
        assert rc == 0
        assert (out_c / cli.CP_FILE).read_bytes() == (
            pipeline_dir / "out" / cli.CP_FILE
        ).read_bytes()

    def test_k_override_controls_prediction_set_width(self, pipeline_dir, capsys):
        cfg = pipeline_dir / "config.toml"
        out_k = pipeline_dir / "k2"
        rc = cli.main(
            ["align", "--config", str(cfg), "--out", str(out_k), "--k", "2", "--audit"]
        )
        capsys.readouterr()
        assert rc == 0
        rows = read_jsonl(out_k / cli.AUDIT_FILE)
        assert rows and all(len(r["topk"]) == 2 for r in rows)

    def test_audit_log_covers_every_sample(self, pipeline_dir, capsys):
        cfg = pipeline_dir / "config.toml"
        out_a = pipeline_dir / "audited"
        rc = cli.main(["align", "--config", str(cfg), "--out", str(out_a), "--audit"])
        capsys.readouterr()
        assert rc == 0
        rows = read_jsonl(out_a / cli.AUDIT_FILE)
        preds = read_jsonl(pipeline_dir / "out" / cli.PREDICTIONS_FILE)
        assert len(rows) == len(preds) == 160
        assert {r["verdict"] for r in rows} == {"shared", "private"}

    def test_probs_flag_appends_distributions(self, pipeline_dir, capsys):
        cfg = pipeline_dir / "config.toml"
        out_p = pipeline_dir / "probs"
        for stage_args in (
            ["discover"],
            ["align"],
            ["refine"],
            ["predict", "--probs"],
        ):
            rc = cli.main(
                [stage_args[0], "--config", str(cfg), "--out", str(out_p)]
                + stage_args[1:]
            )
            assert rc == 0
        capsys.readouterr()
        rows = read_jsonl(out_p / cli.PREDICTIONS_FILE)
        # 5 source + 3 discovered classes
        assert all(len(r["probs"]) == 8 for r in rows)
        assert all(abs(sum(r["probs"]) - 1.0) < 1e-5 for r in rows)


class TestSelfTrainRun:
    def test_run_with_selftrain_writes_adapter_artifacts(self, tmp_path, capsys):
        cfg_path = write_fixture(
            make_clusters(1),
            tmp_path,
            selftrain_lines=[
                "iterations = 5",
                "batch_size = 16",
                "bottleneck = 8",
                "temperature = 1.0",
            ],
        )
        rc = cli.main(["run", "--config", str(cfg_path)])
        capsys.readouterr()
        assert rc == 0
        out = tmp_path / "out"
        for name in (cli.ADAPTER_BIN, cli.ADAPTER_META, cli.HISTORY_FILE):
            assert (out / name).is_file(), name
        history = (out / cli.HISTORY_FILE).read_text().splitlines()
        assert len(history) == 6 and history[0] == "iteration,loss,n_pseudo"
        assert (out / cli.METRICS_FILE).is_file()

    def test_predict_accepts_the_saved_adapter(self, tmp_path, capsys):
        cfg_path = write_fixture(
            make_clusters(1),
            tmp_path,
            selftrain_lines=["iterations = 3", "batch_size = 16", "bottleneck = 8"],
        )
        assert cli.main(["run", "--config", str(cfg_path)]) == 0
        out = tmp_path / "out"
        before = (out / cli.PREDICTIONS_FILE).read_bytes()
        rc = cli.main(
            [
                "predict",
                "--config",
                str(cfg_path),
                "--adapter",
                str(out / cli.ADAPTER_BIN),
            ]
        )
        capsys.readouterr()
        assert rc == 0
        # the run's final predict pass already used the adapter
        assert (out / cli.PREDICTIONS_FILE).read_bytes() == before
