"""End-to-end CLI tests on a miniature corpus and configuration."""

import json

import pytest

from aha.cli import main

TINY_CONFIG = {
    "ltm": {"filters": 8, "kernel_size": 6, "stride": 4, "k_active": 2,
            "epochs": 2, "batch_size": 32},
    "aha": {"pr_hidden": 64, "pm_hidden": 32, "train_steps": 30},
    "fastnn": {"hidden": 48, "train_steps": 30},
    "sweep": {"levels": 2, "seeds": 1, "runs": 1},
}


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, run_corpus, tiny_config):
    """pretrain -> sweep -> report, all through the CLI entry point."""
    out = tmp_path_factory.mktemp("cli_out")
    code = main(["pretrain", "--config", str(tiny_config), "--data", str(run_corpus),
                 "--out", str(out), "--seed", "7"])
    assert code == 0
    code = main(["sweep", "--config", str(tiny_config), "--data", str(run_corpus),
                 "--out", str(out), "--seed", "7"])
    assert code == 0
    report_dir = out / "report"
    code = main(["report", "--results", str(out / "results.csv"),
                 "--out", str(report_dir)])
    assert code == 0
    return out, report_dir


class TestPipeline:
    def test_artifacts_exist(self, pipeline):
        out, report_dir = pipeline
        assert (out / "ltm.ckpt").exists()
        assert (out / "results.csv").exists()
        assert (out / "config.json").exists()  # effective config echoed
        svgs = sorted(p.name for p in report_dir.glob("*.svg"))
        assert len(svgs) == 4  # 2 tasks x 2 kinds
        assert (report_dir / "aggregates.csv").exists()

    def test_results_row_count(self, pipeline):
        out, _ = pipeline
        lines = (out / "results.csv").read_text().strip().splitlines()
        # tasks(2) x kinds(2) x levels(2) x seeds(1) x runs(1) x signals(4)
        assert len(lines) - 1 == 2 * 2 * 2 * 1 * 1 * 4

    def test_eval_command_runs(self, pipeline, run_corpus, tiny_config, capsys):
        out, _ = pipeline
        code = main(["eval", "--config", str(tiny_config), "--data", str(run_corpus),
                     "--out", str(out), "--task", "instance", "--kind", "noise",
                     "--level", "0.3", "--seed", "7"])
        assert code == 0
        printed = capsys.readouterr().out
        assert "accuracy" in printed and "recall loss" in printed


class TestPretrainDeterminism:
    def test_same_seed_byte_identical_checkpoints(self, tmp_path, run_corpus, tiny_config):
        blobs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["pretrain", "--config", str(tiny_config),
                         "--data", str(run_corpus), "--out", str(out), "--seed", "7"])
            assert code == 0
            blobs.append((out / "ltm.ckpt").read_bytes())
        assert blobs[0] == blobs[1]


class TestExitCodes:
    def test_bad_config_exits_2(self, tmp_path, run_corpus):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"ltm": {"bogus_knob": 1}}))
        code = main(["pretrain", "--config", str(bad), "--data", str(run_corpus),
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_missing_dataset_exits_3(self, tmp_path, tiny_config):
        code = main(["pretrain", "--config", str(tiny_config),
                     "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")])
        assert code == 3

    def test_missing_checkpoint_exits_3(self, tmp_path, run_corpus, tiny_config):
        code = main(["sweep", "--config", str(tiny_config), "--data", str(run_corpus),
                     "--out", str(tmp_path / "fresh")])
        assert code == 3

    def test_report_empty_csv_exits_3(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("task,kind,level,seed,run,signal,accuracy,recall_loss\n")
        code = main(["report", "--results", str(empty), "--out", str(tmp_path / "r")])
        assert code == 3
        assert "no results" in capsys.readouterr().err

    def test_no_data_root_anywhere_exits_3(self, tmp_path, tiny_config, monkeypatch):
        monkeypatch.delenv("AHA_DATA_DIR", raising=False)
        code = main(["pretrain", "--config", str(tiny_config), "--out", str(tmp_path / "o")])
        assert code == 3


class TestSynthAndSelftest:
    def test_synth_small_corpus_loads(self, tmp_path):
        out = tmp_path / "corpus"
        code = main(["synth", "--out", str(out), "--seed", "1", "--small"])
        assert code == 0
        from aha.dataset import load_omniglot

        ds = load_omniglot(out)
        assert ds.background.n_alphabets == 30

    def test_selftest_subset(self, capsys):
        code = main(["selftest", "--suite", "corruption",
                     "--suite", "pattern_separation"])
        printed = capsys.readouterr().out
        assert code == 0
        assert "[PASS] corruption/noise_replacement_counts" in printed
        assert "[FAIL]" not in printed

    def test_env_var_dataset_root(self, tmp_path, run_corpus, tiny_config, monkeypatch, capsys):
        monkeypatch.setenv("AHA_DATA_DIR", str(run_corpus))
        out = tmp_path / "envout"
        code = main(["pretrain", "--config", str(tiny_config), "--out", str(out)])
        assert code == 0
        assert (out / "ltm.ckpt").exists()
