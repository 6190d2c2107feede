import csv
import json
import logging
import tomllib
from pathlib import Path

import pytest
from pydantic import ValidationError

from src.cli.config import load_config
from src.cli.handlers import EXIT_CONFIG, EXIT_MISSING_ARTIFACT, EXIT_OK, EXIT_UNEXPECTED, exit_code_for, handle_command_errors
from src.cli.logging_setup import KeyValueFormatter
from src.cli.main import main
from src.cli.report import build_report, seed_summary
from src.cli.workspace import RunDirectory, validate_outputs
from src.errors import (
    ConfigError,
    IncompatibleRunsError,
    MissingArtifactError,
    OutputValidationError,
    RunLockedError,
)
from src.fixer import DenoiserModel, save_fixer
from src.models import FixerConfig
from src.pipeline import ABLATION_ROWS

from .conftest import make_tiny_config

TINY_TOML = """
name = "tiny"
seed = 0
output_root = "runs"

[[curation_scenes]]
seed = 1
width = 16
height = 16
n_frames = 6
n_primitives = 3
supersample = 1

[[curation_scenes]]
seed = 2
trajectory_style = "driving-line"
width = 16
height = 16
n_frames = 6
n_primitives = 3
supersample = 1

[[benchmark_scenes]]
seed = 101
width = 16
height = 16
n_frames = 6
n_primitives = 3
supersample = 1

[scene_fit]
grid_resolution = 8
n_iters = 5
rays_per_step = 128
gaussian_points_per_view = 20

[curation]
pair_budget = 8
val_fraction = 0.5

[extractor]
widths = [4, 8]

[fixer]
widths = [8, 16]
attention_levels = 1
heads = 2
steps = 4
val_every = 2
batch_size = 2

[pipeline]
n_iter = 3
rounds = 2
rays_per_step = 128

[metrics]
tsed_thresholds = [2.0, 4.0]
heatmaps = false
mask_policy = "none"

[experiments]
taus = [10, 1000]
steps = 2
"""


def write_config(directory: Path, text: str = TINY_TOML) -> Path:
    path = directory / "tiny.toml"
    path.write_text(text)
    return path


def stage(command: str, config: Path, runs_root: Path, *extra: str) -> int:
    return main([command, "--config", str(config), "--runs-root", str(runs_root), "--quiet", *extra])


class TestConfig:
    def test_matches_the_python_config(self, tmp_path):
        loaded = load_config(write_config(tmp_path), runs_root=str(tmp_path / "runs"))
        assert loaded.model_dump() == make_tiny_config(tmp_path / "runs").model_dump()

    def test_seed_override(self, tmp_path):
        assert load_config(write_config(tmp_path), seed=9).seed == 9

    def test_runs_root_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.delenv("VIEWFIX_RUNS_ROOT", raising=False)
        monkeypatch.setenv("DIFIX_RUNS_ROOT", str(tmp_path / "elsewhere"))
        assert load_config(write_config(tmp_path)).output_root == str(tmp_path / "elsewhere")
        assert load_config(write_config(tmp_path), runs_root="explicit").output_root == "explicit"

    def test_runs_root_alias(self, tmp_path, monkeypatch):
        monkeypatch.delenv("DIFIX_RUNS_ROOT", raising=False)
        monkeypatch.setenv("VIEWFIX_RUNS_ROOT", str(tmp_path / "alias"))
        assert load_config(write_config(tmp_path)).output_root == str(tmp_path / "alias")
        monkeypatch.setenv("DIFIX_RUNS_ROOT", str(tmp_path / "primary"))
        assert load_config(write_config(tmp_path)).output_root == str(tmp_path / "primary")

    def test_console_scripts(self):
        scripts = tomllib.loads((Path(__file__).parents[1] / "pyproject.toml").read_text())["project"]["scripts"]
        assert scripts["difix"] == "src.cli.main:main"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.toml")

    def test_syntax_error_reports_line(self, tmp_path):
        with pytest.raises(ConfigError, match="line 3"):
            load_config(write_config(tmp_path, 'name = "x"\nseed = 0\nbroken = \n'))

    def test_schema_error_names_field(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write_config(tmp_path, TINY_TOML.replace("heads = 2", "heads = 0")))
        assert "fixer.heads" in info.value.details["fields"]
        assert "fixer.heads" in info.value.message

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write_config(tmp_path, TINY_TOML.replace('name = "tiny"', 'name = "tiny"\ntypo = 1')))
        assert "typo" in info.value.details["fields"]


class TestHandlers:
    def test_exit_codes(self):
        assert exit_code_for(ConfigError("x")) == 2
        assert exit_code_for(MissingArtifactError("a/b")) == 3
        assert exit_code_for(OutputValidationError("x")) == 4
        assert exit_code_for(RunLockedError("x")) == 5
        assert exit_code_for(IncompatibleRunsError(["name"])) == 6
        assert exit_code_for(RuntimeError("x")) == EXIT_UNEXPECTED

    def test_validation_error_is_a_config_error(self):
        with pytest.raises(ValidationError) as info:
            FixerConfig(heads=0)
        assert exit_code_for(info.value) == EXIT_CONFIG

    def test_decorator_prints_message_and_details(self, capsys):
        @handle_command_errors
        def command():
            raise MissingArtifactError("runs/x/fixer.dfx")

        assert command() == EXIT_MISSING_ARTIFACT
        err = capsys.readouterr().err
        assert err.startswith("Error: Missing upstream artifact:")
        assert "path: runs/x/fixer.dfx" in err

    def test_decorator_success_and_unexpected(self, capsys):
        assert handle_command_errors(lambda: None)() == EXIT_OK

        @handle_command_errors
        def broken():
            raise RuntimeError("boom")

        assert broken() == EXIT_UNEXPECTED
        assert "Error: Unexpected error: boom" in capsys.readouterr().err


class TestLogging:
    def test_key_value_format(self):
        record = logging.LogRecord("src.pipeline", logging.INFO, __file__, 1, "Round complete", None, None)
        record.round = 2
        record.scene = "orbit 00101"
        line = KeyValueFormatter().format(record)
        assert line == 'level=info logger=src.pipeline msg="Round complete" round=2 scene="orbit 00101"'


class TestRunDirectory:
    def test_layout_and_lock(self, tiny_run_config):
        with RunDirectory(tiny_run_config) as run:
            assert run.root == Path(tiny_run_config.output_root) / "tiny-seed0"
            assert (run.root / "run.lock").exists()
            record = json.loads((run.root / "run.json").read_text())
            assert record["config"]["name"] == "tiny"
            assert set(record["seeds"]) == {"curation", "fixer", "benchmark", "pipeline", "experiments"}
        assert not (run.root / "run.lock").exists()

    def test_second_writer_is_refused(self, tiny_run_config):
        with RunDirectory(tiny_run_config), pytest.raises(RunLockedError):
            RunDirectory(tiny_run_config).__enter__()

    def test_stage_markers(self, tiny_run_config):
        with RunDirectory(tiny_run_config) as run:
            output = run.root / "out.json"
            output.write_text("{}")
            run.mark_done("curate", [output])
            assert run.is_done("curate")
            assert json.loads(run.marker("curate").read_text()) == ["out.json"]
            run.clear("curate")
            assert not run.is_done("curate")

    def test_malformed_outputs(self, tmp_path):
        bad_json = tmp_path / "a.json"
        bad_json.write_text("{not json")
        empty_csv = tmp_path / "b.csv"
        empty_csv.write_text("")
        for path in [bad_json, empty_csv, tmp_path / "missing.png"]:
            with pytest.raises(OutputValidationError):
                validate_outputs([path])


class TestMainErrors:
    def test_missing_config_exits_2(self, tmp_path):
        assert main(["curate", "--config", str(tmp_path / "absent.toml"), "--quiet"]) == 2

    def test_invalid_config_exits_2(self, tmp_path):
        config = write_config(tmp_path, TINY_TOML.replace("pair_budget = 8", "pair_budget = -1"))
        assert stage("curate", config, tmp_path / "runs") == 2

    def test_renders_without_truth_exits_2(self, tmp_path):
        assert stage("evaluate", write_config(tmp_path), tmp_path / "runs", "--renders", str(tmp_path)) == 2

    def test_stage_before_its_inputs_exits_3(self, tmp_path, capsys):
        assert stage("train-fixer", write_config(tmp_path), tmp_path / "runs") == 3
        assert "manifest.json" in capsys.readouterr().err

    def test_locked_run_exits_5(self, tmp_path):
        root = tmp_path / "runs" / "tiny-seed0"
        root.mkdir(parents=True)
        (root / "run.lock").write_text("1")
        assert stage("curate", write_config(tmp_path), tmp_path / "runs") == 5


def fake_run(directory: Path, config, psnr: dict[str, float]) -> Path:
    directory.mkdir(parents=True)
    (directory / "run.json").write_text(json.dumps({"config": config.model_dump(mode="json"), "seeds": {}}))
    with open(directory / "ablation.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["scene_id", "config", "description", "psnr"])
        for label, value in psnr.items():
            writer.writerow(["orbit-00101", label, "", value])
    return directory


class TestReport:
    def test_seed_median_and_spread(self, tmp_path):
        runs = [
            fake_run(tmp_path / f"tiny-seed{seed}", make_tiny_config(tmp_path).model_copy(update={"seed": seed}), {"baseline": value, "(c)": 30.0})
            for seed, value in enumerate([10.0, 20.0, 12.0])
        ]
        path = build_report(runs, tmp_path / "report")
        text = path.read_text()
        assert "| baseline | reconstruction only | 12.0000 | 10.0000 |" in text
        assert "| (c) | progressive distillation | 30.0000 | 0.0000 |" in text
        assert (tmp_path / "report" / "ablation_psnr.png").exists()

    def test_rows_follow_ablation_order(self, tmp_path):
        run = fake_run(tmp_path / "tiny-seed0", make_tiny_config(tmp_path), {label: 1.0 for label in reversed(ABLATION_ROWS)})
        text = build_report([run], tmp_path / "report").read_text()
        positions = [text.index(f"| {label} |") for label in ABLATION_ROWS]
        assert positions == sorted(positions)
        assert "spread" not in text

    def test_single_run_has_no_spread(self):
        summary = seed_summary([{"baseline": {"psnr": 11.0}}], ["psnr"])
        assert summary == {"baseline": {"psnr": (11.0, None)}}

    def test_missing_metric_is_na(self):
        summary = seed_summary([{"baseline": {"psnr": None}}, {"baseline": {"psnr": None}}], ["psnr"])
        assert summary["baseline"]["psnr"] == (None, None)

    def test_incompatible_runs_exit_6(self, tmp_path):
        config = make_tiny_config(tmp_path)
        a = fake_run(tmp_path / "a", config, {"baseline": 1.0})
        b = fake_run(tmp_path / "b", config.model_copy(update={"name": "other"}), {"baseline": 1.0})
        with pytest.raises(IncompatibleRunsError) as info:
            build_report([a, b], tmp_path / "report")
        assert info.value.mismatched == ["name"]
        assert main(["report", str(a), str(b), "--quiet"]) == 6

    def test_missing_ablation_exit_3(self, tmp_path):
        run = fake_run(tmp_path / "a", make_tiny_config(tmp_path), {"baseline": 1.0})
        (run / "ablation.csv").unlink()
        assert main(["report", str(run), "--output", str(tmp_path / "report"), "--quiet"]) == 3


@pytest.fixture(scope="module")
def chain(tmp_path_factory) -> tuple[Path, Path]:
    """The tiny config taken through every stage once."""
    directory = tmp_path_factory.mktemp("chain")
    config = write_config(directory)
    runs_root = directory / "runs"
    for command in ["curate", "train-fixer", "reconstruct", "update", "enhance", "evaluate"]:
        assert stage(command, config, runs_root) == 0, command
    return config, runs_root / "tiny-seed0"


class TestCommandChain:
    def test_ablation_table(self, chain):
        _, root = chain
        with open(root / "ablation.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["config"] for r in rows] == ABLATION_ROWS
        assert rows[0]["scene_id"] == "orbit-00101"

    def test_stage_outputs(self, chain):
        _, root = chain
        for stage_name in ["curate", "train_fixer", "reconstruct", "update", "enhance", "evaluate"]:
            assert (root / f".done_{stage_name}").exists()
        assert not (root / "run.lock").exists()
        assert len(list((root / "renders" / "gt" / "orbit-00101").glob("*.png"))) == 6
        assert (root / "fixer" / "curves.csv").read_text().startswith("step,")
        latency = json.loads((root / "metrics" / "latency_enhanced.json").read_text())
        assert len(latency["orbit-00101"]) == 6
        assert sorted(p.name for p in (root / "rounds" / "orbit-00101").iterdir()) == ["round_001", "round_002"]

    def test_completed_stage_is_skipped(self, chain, capsys):
        config, root = chain
        manifest = root / "dataset" / "manifest.json"
        before = manifest.stat().st_mtime_ns
        assert stage("curate", config, root.parent) == 0
        assert manifest.stat().st_mtime_ns == before
        counts = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
        assert [name for name, _ in counts] == ["sparse_reconstruction", "cycle_reconstruction", "cross_reference", "model_underfitting"]
        assert sum(int(n) for _, n in counts) == 8

    def test_compare_identical_directories(self, chain):
        config, root = chain
        gt = root / "renders" / "gt" / "orbit-00101"
        assert stage("evaluate", config, root.parent, "--renders", str(gt), "--truth", str(gt)) == 0
        with open(root / "metrics" / "compare.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["view_id"] for r in rows] == [f"{i:03d}" for i in range(6)]
        assert all(r["psnr"] == "inf" for r in rows)
        assert json.loads((root / "metrics" / "compare.json").read_text())["rows"]


def test_identity_fixer_reproduces_the_baseline(tmp_path):
    config = write_config(tmp_path)
    runs_root = tmp_path / "runs"
    assert stage("reconstruct", config, runs_root) == 0
    root = runs_root / "tiny-seed0"
    fixer = FixerConfig(widths=(8, 16), attention_levels=1, heads=2)
    save_fixer(root / "fixer" / "fixer.dfx", DenoiserModel(fixer))

    assert stage("enhance", config, runs_root, "--scene", "baseline") == 0
    baseline = sorted((root / "renders" / "baseline" / "orbit-00101").glob("*.png"))
    enhanced = sorted((root / "renders" / "enhanced_baseline" / "orbit-00101").glob("*.png"))
    assert [p.name for p in baseline] == [p.name for p in enhanced]
    for a, b in zip(baseline, enhanced, strict=True):
        assert a.read_bytes() == b.read_bytes()
