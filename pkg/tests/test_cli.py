import json

import pytest

from prefbayes.cli import build_parser, main
from prefbayes.domain import load_dataset, save_dataset, save_problem


FIT_SPEED = ["--samples", "200", "--burnin", "150", "--chains", "2"]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = main(
        [
            "simulate",
            "--dms", "1",
            "--pairs", "10",
            "--seed", "3",
            "--sharpness", "1000000",
            "--out", str(out),
        ]
    )
    assert rc == 0
    return out


class TestParser:
    def test_mandated_flags_accepted(self):
        parser = build_parser()
        args = parser.parse_args(
            [
                "fit",
                "--problem", "p.json",
                "--data", "d.jsonl",
                "--variant", "iii3",
                "--gamma", "4",
                "--samples", "100",
                "--burnin", "10",
                "--chains", "2",
                "--seed", "5",
                "--out", "outdir",
            ]
        )
        assert args.variant == "iii3" and args.gamma == 4 and args.seed == 5

    def test_missing_subcommand_errors(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestSimulate:
    def test_outputs_exist(self, sim_dir):
        assert (sim_dir / "dm_000.jsonl").exists()
        assert (sim_dir / "manifest.jsonl").exists()
        ds = load_dataset(str(sim_dir / "dm_000.jsonl"))
        assert len(ds.records) == 10

    def test_deterministic(self, sim_dir, tmp_path):
        rc = main(
            [
                "simulate",
                "--dms", "1",
                "--pairs", "10",
                "--seed", "3",
                "--sharpness", "1000000",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 0
        assert (tmp_path / "dm_000.jsonl").read_bytes() == (
            sim_dir / "dm_000.jsonl"
        ).read_bytes()

    def test_choice_only_variant_rejected(self, tmp_path):
        rc = main(["simulate", "--variant", "bor", "--out", str(tmp_path)])
        assert rc == 1


class TestFitPipeline:
    def test_fit_diagnose_report(self, sim_dir, tmp_path, capsys):
        fit_out = tmp_path / "fit"
        rc = main(
            [
                "fit",
                "--data", str(sim_dir / "dm_000.jsonl"),
                "--variant", "i2",
                "--gamma", "2",
                "--seed", "1",
                "--out", str(fit_out),
                *FIT_SPEED,
            ]
        )
        assert rc in (0, 3)  # short chains may legitimately fail convergence
        assert (fit_out / "posterior.csv").exists()
        assert (fit_out / "diagnostics.json").exists()
        assert (fit_out / "result.json").exists()

        rc = main(["diagnose", "--data", str(fit_out / "posterior.csv")])
        assert rc in (0, 3)
        out = capsys.readouterr().out
        assert "rhat_u" in out

        rc = main(["report", "--data", str(fit_out / "result.json")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Rank acceptability" in out and "Weight shares" in out

    def test_invalid_dataset_exit_2(self, tmp_path, sim_dir):
        ds = load_dataset(str(sim_dir / "dm_000.jsonl"))
        ds.records[0].response_time_s = -1.0
        bad = tmp_path / "bad.jsonl"
        save_dataset(ds, str(bad))
        rc = main(["fit", "--data", str(bad), "--out", str(tmp_path), *FIT_SPEED])
        assert rc == 2

    def test_missing_file_exit_1(self, tmp_path):
        rc = main(["fit", "--data", str(tmp_path / "ghost.jsonl"), *FIT_SPEED])
        assert rc == 1


class TestEvaluate:
    def test_small_plan(self, sim_dir, tmp_path, capsys):
        out = tmp_path / "report.json"
        rc = main(
            [
                "evaluate",
                "--data", str(sim_dir / "dm_000.jsonl"),
                "--variant", "i2,bor",
                "--gamma", "2",
                "--repeats", "1",
                "--seed", "4",
                "--out", str(out),
                *FIT_SPEED,
            ]
        )
        assert rc in (0, 3)
        report = json.loads(out.read_text())
        assert set(report["summary"]) == {"i2", "bor"}
        assert (tmp_path / "report.csv").exists()
        text = capsys.readouterr().out
        assert "variant" in text and "ASP" in text

        rc = main(["report", "--data", str(out)])
        assert rc == 0
        assert "i2" in capsys.readouterr().out
