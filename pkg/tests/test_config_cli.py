import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from earlir.cli import main
from earlir.config import ConfigError, load_config
from earlir.dataset import make_protocol
from earlir.evaluation import report
from earlir.matching import write_score_matrix
from earlir.pipeline import method_by_name, run_method

REPO = Path(__file__).resolve().parent.parent
BUNDLED = REPO / "configs" / "table1_synth.toml"


def _cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "earlir.cli", *args],
        cwd=cwd, capture_output=True, text=True,
        env={**os.environ, "PYTHONPATH": str(REPO / "src")},
    )


class TestConfig:
    def test_bundled_config_parses(self):
        config = load_config(BUNDLED)
        assert len(config.methods) == 14
        assert len(config.fusions) == 2
        assert config.fusions[0].components == (("hog+dcva", 0.75), ("ulbp_8_2+lda", 0.25))
        assert config.fusions[1].components == (
            ("hog+dcva", 0.63), ("ulbp_8_2+lda", 0.12), ("lpq+lda", 0.25))

    def test_bad_weight_sum_names_fusion(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            '[dataset.synth]\ndir = "d"\nsubjects = 4\nsamples = 9\n'
            '[run]\nmethods = ["lpq"]\noutput_dir = "o"\n'
            '[[fusion]]\nname = "broken"\n'
            'components = [ { method = "lpq", weight = 0.9 } ]\n'
        )
        with pytest.raises(ConfigError, match="broken"):
            load_config(bad)

    def test_unknown_method_rejected(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            '[dataset.synth]\ndir = "d"\nsubjects = 4\nsamples = 9\n'
            '[run]\nmethods = ["sift"]\noutput_dir = "o"\n'
        )
        with pytest.raises(ConfigError, match="unknown method"):
            load_config(bad)

    def test_dataset_source_exclusive(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[run]\nmethods = ["lpq"]\noutput_dir = "o"\n')
        with pytest.raises(ConfigError, match="exactly one"):
            load_config(bad)

    def test_fusion_component_must_be_listed(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            '[dataset.synth]\ndir = "d"\nsubjects = 4\nsamples = 9\n'
            '[run]\nmethods = ["lpq"]\noutput_dir = "o"\n'
            '[[fusion]]\ncomponents = [ { method = "pca", weight = 1.0 } ]\n'
        )
        with pytest.raises(ConfigError, match="not among"):
            load_config(bad)


class TestSynthCommand:
    def test_happy_path_counts(self, tmp_path):
        res = _cli(["synth", "--out", "data", "--subjects", "4", "--samples", "3",
                    "--seed", "7"], cwd=tmp_path)
        assert res.returncode == 0
        assert "manifest.csv" in res.stdout
        assert len(list((tmp_path / "data").glob("*.pgm"))) == 12

    def test_missing_out_is_usage_error(self, tmp_path):
        res = _cli(["synth", "--subjects", "4"], cwd=tmp_path)
        assert res.returncode == 2

    def test_rerun_identical_bytes(self, tmp_path):
        args = ["synth", "--out", "data", "--subjects", "3", "--samples", "3",
                "--seed", "5", "--width", "20", "--height", "24"]
        for sub in ("a", "b"):
            (tmp_path / sub).mkdir()
            assert _cli(args, cwd=tmp_path / sub).returncode == 0
        for fa in sorted((tmp_path / "a" / "data").iterdir()):
            assert fa.read_bytes() == (tmp_path / "b" / "data" / fa.name).read_bytes()


class TestRunCommand:
    def _small_config(self, tmp_path):
        cfg = tmp_path / "exp.toml"
        cfg.write_text(
            '[dataset.synth]\ndir = "data"\nsubjects = 5\nsamples = 9\n'
            "width = 60\nheight = 80\nnoise_sigma = 0.02\nshift_max = 1\n"
            "[protocol]\ntrain_subjects = 3\ntrain_samples = 2\nprobe_samples = 5\nseed = 2\n"
            '[run]\nmethods = ["lpq", "hog+dcva"]\noutput_dir = "out"\n'
            '[[fusion]]\ncomponents = [ { method = "lpq", weight = 0.5 }, '
            '{ method = "hog+dcva", weight = 0.5 } ]\n'
        )
        return cfg

    def test_dry_run_prints_plan(self, tmp_path):
        cfg = self._small_config(tmp_path)
        res = _cli(["run", "--config", str(cfg), "--dry-run"], cwd=tmp_path)
        assert res.returncode == 0
        assert "experiment plan" in res.stdout
        assert not (tmp_path / "out").exists()

    def test_run_emits_summary_table(self, tmp_path):
        cfg = self._small_config(tmp_path)
        res = _cli(["run", "--config", str(cfg)], cwd=tmp_path)
        assert res.returncode == 0
        assert "RANK-1" in res.stdout
        assert len(res.stdout.strip().splitlines()) == 4  # header + 3 rows
        assert (tmp_path / "out" / "reports" / "summary.csv").exists()

    def test_invalid_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            '[dataset.synth]\ndir = "d"\nsubjects = 4\nsamples = 9\n'
            '[run]\nmethods = ["lpq"]\noutput_dir = "o"\n'
            '[[fusion]]\ncomponents = [ { method = "lpq", weight = 0.9 } ]\n'
        )
        res = _cli(["run", "--config", str(bad)], cwd=tmp_path)
        assert res.returncode == 2
        assert "error" in res.stderr

    def test_runtime_failure_exits_1(self, tmp_path):
        cfg = tmp_path / "exp.toml"
        cfg.write_text(
            '[dataset]\nmanifest = "missing.csv"\n'
            '[run]\nmethods = ["lpq"]\noutput_dir = "out"\n'
        )
        res = _cli(["run", "--config", str(cfg)], cwd=tmp_path)
        assert res.returncode == 1

    def test_env_threads_fallback(self, tmp_path):
        cfg = self._small_config(tmp_path)
        res = subprocess.run(
            [sys.executable, "-m", "earlir.cli", "run", "--config", str(cfg), "--dry-run"],
            cwd=tmp_path, capture_output=True, text=True,
            env={**os.environ, "PYTHONPATH": str(REPO / "src"), "EARLIR_THREADS": "3"},
        )
        assert res.returncode == 0
        assert "threads: 3" in res.stdout


class TestEvalCommand:
    def test_roundtrip_matches_in_process_report(self, small_dataset, tmp_path, capsys):
        protocol = make_protocol(small_dataset, "left", 3, 2, 5, seed=4)
        matrix = run_method(method_by_name("ulbp_8_2"), protocol)
        path = tmp_path / "m.csv"
        write_score_matrix(matrix, path)

        code = main(["eval", "--scores", str(path)])
        out = capsys.readouterr().out
        assert code == 0
        payload = json.loads(out[out.index("{"):])
        rep = report(matrix, config={})
        assert payload["rank_rates_pct"] == [round(r, 4) for r in rep.rank_rates]
        assert payload["eer_pct"] == round(rep.eer, 4)
        assert payload["perfect_rank"] == rep.perfect_rank

    def test_missing_sidecar_reports_labels_required(self, tmp_path, capsys):
        path = tmp_path / "m.csv"
        path.write_text("probe_id,g0\np0,0.5\n", encoding="utf-8")
        code = main(["eval", "--scores", str(path)])
        err = capsys.readouterr().err
        assert code == 1
        assert "labels required" in err

    def test_degenerate_genuine_only_matrix_clean_error(self, tmp_path, capsys):
        path = tmp_path / "m.csv"
        path.write_text("probe_id,g0\np0,0.5\n", encoding="utf-8")
        sidecar = tmp_path / "m.labels.csv"
        sidecar.write_text("axis,id,label\ngallery,g0,s0\nprobe,p0,s0\n", encoding="utf-8")
        code = main(["eval", "--scores", str(path)])
        err = capsys.readouterr().err
        assert code == 1
        assert "impostor" in err
