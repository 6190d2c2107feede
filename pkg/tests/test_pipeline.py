import shutil

import pytest
import torch

from src.curation import orbit_trajectory
from src.errors import PipelineError
from src.fixer import DenoiserModel, FixerInput, fix_image
from src.geometry import pose_distance
from src.losses import FeatureExtractor
from src.models.camera_types import Camera
from src.models.config_types import PipelineConfig
from src.models.record_types import RoundLog
from src.pipeline import (
    ABLATION_ROWS,
    PseudoEntry,
    RoundWriter,
    TrainingSetState,
    nearest_training_camera,
    plateau_rounds,
    post_render_enhance,
    progressive_update,
    run_ablation,
    single_shot_update,
    step_toward,
    write_ablation_csv,
)
from src.scene import RadianceFieldGrid, render

BOUNDS = ((-1.5, -1.5, -0.5), (1.5, 1.5, 1.5))
PIPELINE = PipelineConfig(n_iter=2, rounds=3, rays_per_step=64)
# Full steps put every pseudo view on its target from round 1; any loss change counts as flat.
EARLY_STOP = PIPELINE.model_copy(update={"rounds": 6, "delta_pose": 1.0, "early_stop": True, "plateau_tolerance": 1e9})


def make_scene() -> RadianceFieldGrid:
    torch.manual_seed(0)
    return RadianceFieldGrid(BOUNDS, resolution=4)


@pytest.fixture
def setup(intrinsics):
    """Four reference views on an orbit and two targets on a higher, phase-shifted orbit."""
    reference = orbit_trajectory(intrinsics, 4, radius=4.0, height=1.0)
    targets = orbit_trajectory(intrinsics, 2, radius=4.0, height=2.0, phase=0.4)
    generator = torch.Generator().manual_seed(0)
    views = [(c, torch.rand(3, 16, 16, generator=generator)) for c in reference]
    return views, targets


@pytest.fixture
def fixer(tiny_fixer_config) -> DenoiserModel:
    return DenoiserModel(tiny_fixer_config)


def parameters(scene) -> list[torch.Tensor]:
    return [p.detach().clone() for p in scene.parameters()]


class TestPoseSteps:
    def test_snap_and_full_step_reach_target(self, camera_pair):
        a, b = camera_pair
        assert step_toward(a, b, 0.25, snap=True) == b
        assert step_toward(a, b, 1.0, snap=False) == b

    def test_partial_step_shrinks_distance(self, camera_pair):
        a, b = camera_pair
        moved = step_toward(a, b, 0.25, snap=False)
        assert pose_distance(moved.pose, b.pose) == pytest.approx(0.75 * pose_distance(a.pose, b.pose), rel=1e-9)

    def test_snap_tolerance(self, camera_pair):
        a, b = camera_pair
        assert step_toward(a, b, 0.99, snap=False, snap_tolerance=10.0) == b

    def test_nearest_ties_take_lowest_index(self, camera_pair):
        a, b = camera_pair
        assert nearest_training_camera(b, [a, b, b]) == 1


class TestTrainingSet:
    def test_append_only(self, setup):
        views, targets = setup
        state = TrainingSetState.from_views(views)
        with pytest.raises(PipelineError):
            state.append([state.references[0]])
        state.append([PseudoEntry(targets[0], torch.zeros(3, 16, 16), 0.5, 1, 0)])
        assert len(state) == 5 and len(state.pseudo_for_round(1)) == 1
        with pytest.raises(PipelineError):
            state.check_invariants(rounds_done=2, n_targets=1)

    def test_pseudo_view_at_a_reference_camera_is_rejected(self, setup):
        views, _ = setup
        state = TrainingSetState.from_views(views)
        same_camera = Camera.from_record(views[0][0].to_record())
        with pytest.raises(PipelineError, match="overwrite"):
            state.append([PseudoEntry(same_camera, torch.zeros(3, 16, 16), 0.5, 1, 0)])
        assert state.pseudo == []

        state.pseudo.append(PseudoEntry(same_camera, torch.zeros(3, 16, 16), 0.5, 1, 0))
        with pytest.raises(PipelineError, match="shares its camera"):
            state.check_invariants(rounds_done=1, n_targets=1)


class TestProgressive:
    def test_zero_rounds_changes_nothing(self, setup, fixer):
        views, targets = setup
        scene = make_scene()
        before = parameters(scene)
        result = progressive_update(scene, views, targets, fixer, PIPELINE.model_copy(update={"rounds": 0}))
        assert len(result.state) == len(views) and result.logs == []
        assert all(torch.equal(x, y) for x, y in zip(before, parameters(scene), strict=True))

    def test_training_set_grows_by_targets_per_round(self, setup, fixer):
        views, targets = setup
        result = progressive_update(make_scene(), views, targets, fixer, PIPELINE)
        assert [log.training_set_size for log in result.logs] == [4 + 2 * r for r in (1, 2, 3)]
        assert all(log.pseudo_views_added == 2 for log in result.logs)
        for entry, (camera, image) in zip(result.state.references, views, strict=True):
            assert entry.camera == camera and entry.image is image

    def test_cameras_walk_to_targets(self, setup, fixer):
        views, targets = setup
        result = progressive_update(make_scene(), views, targets[:1], fixer, PIPELINE.model_copy(update={"rounds": 4}))
        distances = [log.mean_target_distance for log in result.logs]
        assert all(later < earlier for earlier, later in zip(distances, distances[1:], strict=False))
        assert distances[-1] == 0.0
        assert result.state.pseudo_for_round(4)[0].camera == targets[0]

    def test_early_stop_after_two_flat_rounds_at_targets(self, setup, fixer):
        views, targets = setup
        result = progressive_update(make_scene(), views, targets, fixer, EARLY_STOP)
        assert [log.round for log in result.logs] == [1, 2, 3]
        assert all(log.mean_target_distance == 0.0 for log in result.logs)

    def test_resume_keeps_the_early_stop_round(self, setup, fixer, tmp_path):
        views, targets = setup
        full = progressive_update(make_scene(), views, targets, fixer, EARLY_STOP, seed=3, writer=RoundWriter(tmp_path / "full"))
        shutil.copytree(tmp_path / "full" / "round_001", tmp_path / "partial" / "round_001")
        shutil.copytree(tmp_path / "full" / "round_002", tmp_path / "partial" / "round_002")
        resumed = progressive_update(make_scene(), views, targets, fixer, EARLY_STOP, seed=3, writer=RoundWriter(tmp_path / "partial"))

        assert [log.round for log in resumed.logs] == [log.round for log in full.logs] == [1, 2, 3]
        assert RoundWriter(tmp_path / "partial").completed_rounds() == [1, 2, 3]
        for x, y in zip(parameters(full.scene), parameters(resumed.scene), strict=True):
            assert torch.equal(x, y)

        rerun = progressive_update(make_scene(), views, targets, fixer, EARLY_STOP, seed=3, writer=RoundWriter(tmp_path / "full"))
        assert [log.round for log in rerun.logs] == [1, 2, 3]
        assert RoundWriter(tmp_path / "full").completed_rounds() == [1, 2, 3]

    def test_plateau_counts_only_rounds_at_targets(self):
        def log(index: int, loss: float, distance: float) -> RoundLog:
            return RoundLog(
                round=index, pseudo_views_added=1, training_set_size=4 + index, final_train_loss=loss, mean_target_distance=distance, fix_latency_ms=0.0
            )

        assert plateau_rounds([log(1, 1.0, 0.5), log(2, 1.0, 0.2)], 1e-3) == 0
        assert plateau_rounds([log(1, 1.0, 0.0), log(2, 1.0, 0.0), log(3, 1.0, 0.0)], 1e-3) == 2
        assert plateau_rounds([log(1, 1.0, 0.0), log(2, 1.0, 0.0), log(3, 0.5, 0.0)], 1e-3) == 0

    def test_needs_targets(self, setup, fixer):
        views, _ = setup
        with pytest.raises(PipelineError):
            progressive_update(make_scene(), views, [], fixer, PIPELINE)

    def test_resume_matches_uninterrupted_run(self, setup, fixer, tmp_path):
        views, targets = setup
        full = progressive_update(make_scene(), views, targets, fixer, PIPELINE, seed=3, writer=RoundWriter(tmp_path / "full"))
        assert RoundWriter(tmp_path / "full").completed_rounds() == [1, 2, 3]

        # Keep the first two rounds only, as if the run died during round 3.
        shutil.copytree(tmp_path / "full" / "round_001", tmp_path / "partial" / "round_001")
        shutil.copytree(tmp_path / "full" / "round_002", tmp_path / "partial" / "round_002")
        resumed = progressive_update(make_scene(), views, targets, fixer, PIPELINE, seed=3, writer=RoundWriter(tmp_path / "partial"))

        assert [log.round for log in resumed.logs] == [1, 2, 3]
        assert len(resumed.state) == len(full.state)
        for x, y in zip(parameters(full.scene), parameters(resumed.scene), strict=True):
            assert torch.equal(x, y)

    def test_only_gap_free_rounds_resume(self, setup, fixer, tmp_path):
        views, targets = setup
        progressive_update(make_scene(), views, targets, fixer, PIPELINE, writer=RoundWriter(tmp_path))
        (tmp_path / "round_002" / "COMPLETE").unlink()
        assert RoundWriter(tmp_path).completed_rounds() == [1]

    def test_single_shot(self, setup, fixer):
        views, targets = setup
        result = single_shot_update(make_scene(), views, targets, fixer, PIPELINE)
        assert len(result.state) == len(views) + len(targets)
        assert [e.camera for e in result.state.pseudo] == targets


class TestEnhance:
    def test_identity_fixer_returns_render(self, setup, fixer):
        _, targets = setup
        scene = make_scene()
        out = post_render_enhance(scene, targets[0], fixer, [])
        assert torch.equal(out.image, out.raw)
        assert out.render_ms >= 0.0 and out.fix_ms >= 0.0

    def test_equals_render_then_fix(self, setup, tiny_fixer_config):
        views, targets = setup
        fixer = DenoiserModel(tiny_fixer_config)
        with torch.no_grad():
            fixer.head.weight.normal_(0.0, 0.05, generator=torch.Generator().manual_seed(1))
        scene = make_scene()
        references = [views[0][1]]
        out = post_render_enhance(scene, targets[1], fixer, references)
        with torch.no_grad():
            raw = render(scene, targets[1]).rgb.to(torch.float32).clamp(0.0, 1.0)
        assert torch.equal(out.image, fix_image(fixer, FixerInput(raw, references, fixer.config.tau)))


class TestAblation:
    def test_rows_and_identity_equivalences(self, tiny_run_config, tiny_fixer_config, tmp_path):
        extractor = FeatureExtractor(widths=(4, 8), seed=0)
        result = run_ablation(tiny_run_config, DenoiserModel(tiny_fixer_config), extractor)
        table = result.table()
        assert [row["config"] for row in table] == ABLATION_ROWS
        by_label = {row["config"]: row for row in table}
        # An untrained fixer is the identity, so fixing changes no pixel.
        assert by_label["(a)"]["psnr"] == by_label["baseline"]["psnr"]
        assert by_label["(d)"]["psnr"] == by_label["(c)"]["psnr"]
        assert len(result.latencies_ms) == tiny_run_config.benchmark_scenes[0].n_frames

        header = write_ablation_csv(tmp_path / "ablation.csv", table).read_text().splitlines()[0]
        assert header.startswith("scene_id,config,description,psnr,ssim,lpips_proxy,fid_proxy")
        assert header.endswith("tsed@2,tsed@4")
