import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from src.curation import orbit_trajectory
from src.errors import DomainError, ShapeMismatchError
from src.geometry import fundamental_matrix
from src.losses import FeatureExtractor
from src.metrics import (
    PatchMatchCorrespondences,
    ReprojectionCorrespondences,
    TsedFrame,
    evaluate_views,
    fid,
    frame_pairs,
    frechet_distance,
    image_features,
    perceptual_distance,
    psnr,
    ssim,
    tsed,
    visibility_mask,
    write_report_csv,
)
from src.models.config_types import MetricsConfig
from src.pipeline.ablation import ablation_row, write_ablation_csv
from src.scene import GaussianCloud, RadianceFieldGrid


def random_image(seed: int, size: int = 16) -> torch.Tensor:
    return torch.rand(3, size, size, generator=torch.Generator().manual_seed(seed), dtype=torch.float64)


@pytest.fixture
def extractor() -> FeatureExtractor:
    return FeatureExtractor(widths=(4, 8), seed=0)


class TestPsnr:
    def test_uniform_error(self):
        target = torch.full((3, 16, 16), 0.5, dtype=torch.float64)
        assert psnr(target + 0.1, target) == pytest.approx(20.0, abs=1e-9)

    def test_identical_is_infinite(self):
        image = random_image(0)
        assert psnr(image, image) == math.inf

    def test_full_mask_matches_unmasked(self):
        a, b = random_image(1), random_image(2)
        assert psnr(a, b, torch.ones(16, 16, dtype=torch.bool)) == psnr(a, b)

    def test_mask_restricts_pixels(self):
        target = torch.zeros(3, 16, 16, dtype=torch.float64)
        pred = target.clone()
        pred[:, :8] = 0.1
        pred[:, 8:] = 1.0
        mask = torch.zeros(16, 16, dtype=torch.bool)
        mask[:8] = True
        assert psnr(pred, target, mask) == pytest.approx(20.0, abs=1e-9)

    def test_empty_mask(self):
        image = random_image(3)
        with pytest.raises(DomainError):
            psnr(image, image, torch.zeros(16, 16, dtype=torch.bool))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            psnr(torch.zeros(3, 16, 16), torch.zeros(3, 16, 8))


class TestSsim:
    def test_identical_is_one(self):
        image = random_image(4)
        assert ssim(image, image) == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 10_000))
    def test_symmetric_and_bounded(self, seed):
        a, b = random_image(seed), random_image(seed + 1)
        value = ssim(a, b)
        assert value == pytest.approx(ssim(b, a), abs=1e-12)
        assert -1.0 <= value <= 1.0

    def test_full_mask_matches_unmasked(self):
        a, b = random_image(5), random_image(6)
        assert ssim(a, b, torch.ones(16, 16, dtype=torch.bool)) == ssim(a, b)

    def test_too_small(self):
        with pytest.raises(DomainError):
            ssim(torch.zeros(3, 8, 8), torch.zeros(3, 8, 8))


class TestPerceptualDistance:
    def test_identical_is_zero(self, extractor):
        image = random_image(7)
        assert perceptual_distance(image, image, extractor) == 0.0

    def test_positive_for_different_images(self, extractor):
        assert perceptual_distance(random_image(8), random_image(9), extractor) > 0.0


class TestFid:
    def test_identical_sets(self, extractor):
        images = [random_image(i) for i in range(6)]
        features = image_features(images, extractor)
        assert fid(features, features) < 1e-6

    def test_mean_shift(self):
        cov = np.eye(2)
        assert frechet_distance(np.zeros(2), cov, np.array([3.0, 4.0]), cov) == pytest.approx(25.0, abs=1e-9)

    def test_diagonal_covariances(self):
        a, b = np.diag([1.0, 4.0]), np.diag([4.0, 1.0])
        # tr(a + b) - 2 tr((a b)^1/2) = 10 - 2 * 4
        assert frechet_distance(np.zeros(2), a, np.zeros(2), b) == pytest.approx(2.0, abs=1e-9)

    def test_needs_two_samples(self):
        with pytest.raises(DomainError):
            fid(np.zeros((1, 3)), np.zeros((4, 3)))

    def test_non_finite_features(self):
        features = np.ones((3, 2))
        features[0, 0] = np.nan
        with pytest.raises(DomainError):
            fid(features, np.ones((3, 2)))


def plane_frame(camera, depth: float = 3.0, image: torch.Tensor | None = None) -> TsedFrame:
    h, w = camera.height, camera.width
    return TsedFrame(camera=camera, image=image if image is not None else torch.zeros(3, h, w), depth=np.full((h, w), depth))


class TestTsed:
    def test_exact_correspondences_are_consistent(self, camera_pair):
        a, b = camera_pair
        result = tsed([plane_frame(a), plane_frame(b), plane_frame(a)], ReprojectionCorrespondences(stride=1), [0.5, 2.0])
        assert result.evaluated == 2
        assert result.scores == {0.5: 1.0, 2.0: 1.0}
        assert max(result.median_distances) < 1e-6

    def test_same_camera_pairs_are_degenerate(self, camera):
        result = tsed([plane_frame(camera), plane_frame(camera)], ReprojectionCorrespondences())
        assert result.degenerate == 1
        assert result.evaluated == 0
        assert all(score is None for score in result.scores.values())

    def test_pairs_without_matches_are_skipped(self, camera_pair):
        def nothing(frame_a, frame_b):
            return np.zeros((0, 2)), np.zeros((0, 2))

        result = tsed([plane_frame(c) for c in camera_pair], nothing)
        assert result.skipped == 1 and result.evaluated == 0
        assert result.as_dict() == {"2": None, "4": None, "8": None}

    def test_off_line_matches_fail_tight_threshold(self, camera_pair):
        a, b = camera_pair
        exact = ReprojectionCorrespondences(stride=1)

        def shifted(frame_a, frame_b):
            xs, xs_b = exact(frame_a, frame_b)
            # 5 px along the epipolar line normal
            F_ab = fundamental_matrix(frame_a.camera, frame_b.camera).matrix
            lines = np.c_[xs, np.ones(len(xs))] @ F_ab.T
            normals = lines[:, :2] / np.linalg.norm(lines[:, :2], axis=1, keepdims=True)
            return xs, xs_b + 5.0 * normals

        result = tsed([plane_frame(a), plane_frame(b)], shifted, [1.0, 100.0])
        assert result.scores[1.0] == 0.0
        assert result.scores[100.0] == 1.0

    def test_needs_two_frames(self, camera):
        with pytest.raises(DomainError):
            tsed([plane_frame(camera)], ReprojectionCorrespondences())

    def test_frame_pairs(self):
        assert frame_pairs(3) == [(0, 1), (1, 2)]
        assert len(frame_pairs(4, "all")) == 6
        with pytest.raises(DomainError):
            frame_pairs(3, "random")

    def test_reprojection_needs_depth(self, camera_pair):
        a, b = camera_pair
        with pytest.raises(DomainError):
            ReprojectionCorrespondences()(TsedFrame(a, torch.zeros(3, 16, 16)), plane_frame(b))

    def test_patch_match_stays_within_radius(self, camera_pair):
        a, b = camera_pair
        provider = PatchMatchCorrespondences(stride=1, patch=3, radius=2)
        frame_a, frame_b = plane_frame(a, image=random_image(10)), plane_frame(b, image=random_image(11))
        xs, matched = provider(frame_a, frame_b)
        _, seeds = provider.seeds(frame_a, frame_b)
        assert xs.shape == matched.shape == seeds.shape
        assert np.all(np.abs(matched - seeds) <= 2.0 + 1e-9)

    def test_patch_match_keeps_seed_on_flat_images(self, camera_pair):
        a, b = camera_pair
        provider = PatchMatchCorrespondences(stride=1, patch=3, radius=2)
        frame_a, frame_b = plane_frame(a), plane_frame(b)
        _, matched = provider(frame_a, frame_b)
        np.testing.assert_array_equal(matched, provider.seeds(frame_a, frame_b)[1])


class TestEvaluateViews:
    def test_identical_sets(self, extractor, tmp_path):
        images = [random_image(i) for i in range(3)]
        report = evaluate_views(images, images, extractor, MetricsConfig(mask_policy="none"))
        assert all(row.psnr == math.inf for row in report.rows)
        assert report.aggregates.ssim == pytest.approx(1.0, abs=1e-12)
        assert report.aggregates.perceptual == 0.0
        assert report.aggregates.fid < 1e-6
        text = write_report_csv(tmp_path / "report.csv", report).read_text()
        assert text.splitlines()[0] == "view_id,psnr,ssim,perceptual,masked,mask_fraction"
        assert text.splitlines()[1].startswith("000,inf,")

    def test_aggregates_are_row_means(self, extractor):
        predictions = [random_image(i) for i in range(3)]
        targets = [random_image(i + 10) for i in range(3)]
        report = evaluate_views(predictions, targets, extractor, MetricsConfig(mask_policy="none"))
        assert report.aggregates.psnr == pytest.approx(sum(r.psnr for r in report.rows) / 3)

    def test_mask_policy_none_ignores_masks(self, extractor):
        a, b = random_image(1), random_image(2)
        mask = torch.zeros(16, 16, dtype=torch.bool)
        mask[:, :12] = True
        masked = evaluate_views([a], [b], extractor, MetricsConfig(), masks=[mask])
        unmasked = evaluate_views([a], [b], extractor, MetricsConfig(mask_policy="none"), masks=[mask])
        assert masked.rows[0].masked and masked.rows[0].mask_fraction == pytest.approx(0.75)
        assert unmasked.rows[0].psnr == psnr(a, b)
        assert masked.aggregates.fid is None

    def test_unevaluated_tsed_is_blank_not_zero(self, extractor, camera, tmp_path):
        images = [random_image(0), random_image(1)]
        frames = [plane_frame(camera), plane_frame(camera)]
        config = MetricsConfig(mask_policy="none")
        report = evaluate_views(images, images, extractor, config, tsed_frames=frames, correspondences=ReprojectionCorrespondences())
        assert report.aggregates.tsed_evaluated == 0
        assert report.aggregates.tsed == {"2": None, "4": None, "8": None}
        table = write_ablation_csv(tmp_path / "ablation.csv", [ablation_row("orbit", "baseline", report)]).read_text().splitlines()
        assert table[1].endswith(",,,")

    def test_count_mismatch(self, extractor):
        with pytest.raises(ValueError):
            evaluate_views([random_image(0)], [], extractor)


def test_empty_scene_is_invisible(camera):
    assert not visibility_mask(GaussianCloud.empty(), camera).any()


class TestProperties:
    def test_psnr_falls_with_noise(self):
        target = torch.full((3, 16, 16), 0.5, dtype=torch.float64)
        noise = torch.randn(3, 16, 16, generator=torch.Generator().manual_seed(0), dtype=torch.float64)
        values = [psnr(target + a * noise, target) for a in (0.01, 0.02, 0.05, 0.1, 0.2)]
        assert all(b < a for a, b in zip(values, values[1:], strict=False))

    def test_fid_symmetric(self, extractor):
        a = image_features([random_image(i) for i in range(5)], extractor)
        b = image_features([random_image(i + 20) for i in range(5)], extractor)
        assert fid(a, b) == pytest.approx(fid(b, a), abs=1e-6)

    def test_fid_matches_closed_form_on_samples(self):
        rng = np.random.default_rng(0)
        mu_a, mu_b = np.array([0.0, 0.0]), np.array([1.0, -0.5])
        cov_a, cov_b = np.array([[1.0, 0.3], [0.3, 0.5]]), np.array([[0.6, -0.2], [-0.2, 1.2]])
        samples_a = rng.multivariate_normal(mu_a, cov_a, size=10_000)
        samples_b = rng.multivariate_normal(mu_b, cov_b, size=10_000)
        exact = frechet_distance(mu_a, cov_a, mu_b, cov_b)
        assert fid(samples_a, samples_b) == pytest.approx(exact, rel=0.02)

    def test_opaque_scene_is_visible_from_its_own_view(self, camera):
        grid = RadianceFieldGrid(((-3.0, -3.0, -3.0), (3.0, 3.0, 3.0)), resolution=4)
        with torch.no_grad():
            grid.density_raw.fill_(60.0)
        assert visibility_mask(grid, camera).all()


def orbit_frames(intrinsics, n: int) -> list[TsedFrame]:
    return [plane_frame(c, depth=4.0) for c in orbit_trajectory(intrinsics, n, radius=5.0, height=1.5)]


class TestTsedSequence:
    def test_thresholds_are_monotone_and_infinite_passes_all(self, intrinsics):
        noisy = ReprojectionCorrespondences(stride=2)

        def jitter(frame_a, frame_b):
            xs, xs_b = noisy(frame_a, frame_b)
            return xs, xs_b + np.random.default_rng(0).normal(scale=3.0, size=xs_b.shape)

        result = tsed(orbit_frames(intrinsics, 5), jitter, [2.0, 4.0, 8.0, math.inf])
        scores = [result.scores[t] for t in (2.0, 4.0, 8.0, math.inf)]
        assert scores == sorted(scores)
        assert scores[-1] == 1.0

    def test_corrupting_half_the_pairs(self, intrinsics):
        exact = ReprojectionCorrespondences(stride=2)
        frames = orbit_frames(intrinsics, 5)
        corrupted = {id(frames[0]), id(frames[2])}

        def provider(frame_a, frame_b):
            xs, xs_b = exact(frame_a, frame_b)
            if id(frame_a) not in corrupted:
                return xs, xs_b
            F_ab = fundamental_matrix(frame_a.camera, frame_b.camera).matrix
            lines = np.c_[xs, np.ones(len(xs))] @ F_ab.T
            return xs, xs_b + 5.0 * lines[:, :2] / np.linalg.norm(lines[:, :2], axis=1, keepdims=True)

        clean = tsed(frames, exact, [2.0]).scores[2.0]
        noisy = tsed(frames, provider, [2.0]).scores[2.0]
        assert clean == 1.0
        assert noisy == pytest.approx(clean - 0.5)
