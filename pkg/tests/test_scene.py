import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation
from torch import nn
from torch.func import functional_call

from src.errors import DomainError, SceneOptimizationError, ShapeMismatchError
from src.geometry import look_at
from src.models.camera_types import Camera, CameraIntrinsics
from src.scene import (
    GaussianCloud,
    GaussianParticle,
    RadianceFieldGrid,
    RayBundle,
    TrainingView,
    composite,
    field_alpha,
    gaussian_alpha,
    load_scene,
    optimize_scene,
    render,
    save_scene,
    voxelize_gaussians,
)


def axis_camera(size: int = 15, fov: float = 60.0, distance: float = 4.0) -> Camera:
    return Camera(intrinsics=CameraIntrinsics.from_fov(size, size, fov), pose=look_at((distance, 0.0, 0.0), (0.0, 0.0, 0.0)))


def particle(mean=(0.0, 0.0, 0.0), scale=0.4, opacity=0.5, color=(0.9, 0.2, 0.2), rotation=(1.0, 0.0, 0.0, 0.0)) -> GaussianParticle:
    return GaussianParticle(
        mean=np.asarray(mean, dtype=np.float64),
        rotation=np.asarray(rotation, dtype=np.float64),
        scale=np.full(3, scale) if np.isscalar(scale) else np.asarray(scale, dtype=np.float64),
        opacity=opacity,
        color=np.asarray(color, dtype=np.float64),
    )


def brute_composite(alphas: torch.Tensor, colors: torch.Tensor):
    color = torch.zeros(colors.shape[0], colors.shape[-1], dtype=alphas.dtype)
    acc = torch.zeros(alphas.shape[0], dtype=alphas.dtype)
    transmittance = torch.ones(alphas.shape[0], dtype=alphas.dtype)
    for i in range(alphas.shape[1]):
        color += (transmittance * alphas[:, i]).unsqueeze(-1) * colors[:, i]
        acc += transmittance * alphas[:, i]
        transmittance = transmittance * (1.0 - alphas[:, i])
    return color, acc


class _RenderRays(nn.Module):
    def __init__(self, scene, rays):
        super().__init__()
        self.scene = scene
        self.rays = rays

    def forward(self):
        rgb, depth, acc = self.scene.render_rays(self.rays)
        return rgb, depth, acc


class TestFieldAlpha:
    def test_closed_form(self):
        assert field_alpha(1.0, 1.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
        assert field_alpha(0.0, 0.3) == 0.0

    def test_monotone_towards_one(self):
        values = [field_alpha(s, 0.1) for s in (0.1, 1.0, 10.0, 100.0, 1000.0)]
        assert values == sorted(values)
        assert 0.999 < values[-1] <= 1.0

    @pytest.mark.parametrize("sigma, delta", [(-1.0, 0.1), (1.0, 0.0), (1.0, -0.5)])
    def test_domain(self, sigma, delta):
        with pytest.raises(DomainError):
            field_alpha(sigma, delta)

    def test_tensor_input(self):
        out = field_alpha(torch.tensor([0.0, 1.0], dtype=torch.float64), 1.0)
        torch.testing.assert_close(out, torch.tensor([0.0, 1.0 - math.exp(-1.0)], dtype=torch.float64))


class TestGaussianAlpha:
    def test_at_mean_equals_opacity(self):
        p = particle(mean=(0.3, -0.2, 1.0), opacity=0.7)
        assert gaussian_alpha(p, p.mean) == 0.7

    def test_unit_mahalanobis_distance(self):
        p = particle(scale=(0.5, 1.0, 2.0), opacity=0.8)
        assert gaussian_alpha(p, (0.0, 0.0, 2.0)) == pytest.approx(0.8 * math.exp(-0.5), rel=1e-8)

    @given(st.integers(0, 1000))
    def test_isotropic_value_ignores_rotation(self, seed):
        rng = np.random.default_rng(seed)
        q = Rotation.from_quat(rng.normal(size=4)).as_quat()
        rotated = particle(rotation=(q[3], q[0], q[1], q[2]), scale=0.7)
        point = rng.normal(size=3)
        assert gaussian_alpha(rotated, point) == pytest.approx(gaussian_alpha(particle(scale=0.7), point), rel=1e-9)

    def test_tiny_scale_does_not_crash(self):
        p = particle(scale=1e-12, opacity=0.5)
        assert gaussian_alpha(p, (1.0, 0.0, 0.0)) == 0.0
        assert gaussian_alpha(p, p.mean) == 0.5

    def test_particle_validation(self):
        with pytest.raises(ValueError):
            particle(opacity=1.5)
        with pytest.raises(ValueError):
            particle(scale=(1.0, 0.0, 1.0))

    def test_covariance_is_spd(self):
        q = Rotation.from_euler("xyz", [0.3, -0.4, 1.1]).as_quat()
        cov = particle(rotation=(q[3], q[0], q[1], q[2]), scale=(0.2, 0.5, 1.0)).covariance()
        np.testing.assert_allclose(cov, cov.T, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(cov) > 0)


class TestComposite:
    def test_single_opaque_sample(self):
        color, acc = composite(torch.tensor([1.0]), torch.tensor([[0.3, 0.6, 0.9]]))
        torch.testing.assert_close(color, torch.tensor([0.3, 0.6, 0.9]))
        assert float(acc) == 1.0

    def test_hand_computed(self):
        color, acc = composite(torch.tensor([0.5, 0.5], dtype=torch.float64), torch.tensor([[1.0], [0.0]], dtype=torch.float64))
        assert float(color[0]) == 0.5
        assert float(acc) == 0.75

    def test_transparent_and_empty(self):
        color, acc = composite(torch.zeros(4), torch.rand(4, 3))
        assert not color.any() and float(acc) == 0.0
        color, acc = composite(torch.zeros(0), torch.zeros(0, 3))
        assert color.shape == (3,) and not color.any() and float(acc) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            composite(torch.zeros(3), torch.zeros(4, 3))

    def test_matches_recursive_definition(self):
        generator = torch.Generator().manual_seed(0)
        alphas = torch.rand(100_000, 12, generator=generator, dtype=torch.float64)
        colors = torch.rand(100_000, 12, 3, generator=generator, dtype=torch.float64)
        color, acc = composite(alphas, colors)
        expected_color, expected_acc = brute_composite(alphas, colors)
        assert float((color - expected_color).abs().max()) < 1e-12
        assert float((acc - expected_acc).abs().max()) < 1e-12
        assert float(acc.min()) >= 0.0 and float(acc.max()) <= 1.0


class TestRender:
    def test_empty_cloud_is_background(self):
        out = render(GaussianCloud.empty(), axis_camera(), background=0.25)
        assert torch.all(out.rgb == 0.25)
        assert not out.accumulation.any()

    def test_empty_field_is_background(self):
        grid = RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=4)
        with torch.no_grad():
            grid.density_raw.fill_(-60.0)
        out = render(grid, axis_camera())
        torch.testing.assert_close(out.rgb, torch.full_like(out.rgb, 0.5), atol=1e-6, rtol=0)

    def test_opaque_gaussian_on_axis(self):
        cloud = GaussianCloud.from_particles([particle(scale=0.5, opacity=0.999, color=(0.2, 0.7, 0.4))], dtype=torch.float64)
        out = render(cloud, axis_camera())
        center = out.rgb[:, 7, 7]
        assert torch.allclose(center, torch.tensor([0.2, 0.7, 0.4], dtype=torch.float64), atol=0.02)
        assert float(out.depth[7, 7]) == pytest.approx(0.999 * 4.0, abs=1e-6)

    @given(st.integers(0, 200))
    def test_accumulation_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        particles = [
            particle(mean=rng.uniform(-1, 1, 3), scale=rng.uniform(0.1, 0.6, 3), opacity=float(rng.uniform(0, 1)), color=rng.uniform(0, 1, 3))
            for _ in range(5)
        ]
        out = render(GaussianCloud.from_particles(particles, dtype=torch.float64), axis_camera(size=8))
        assert float(out.accumulation.min()) >= 0.0 and float(out.accumulation.max()) <= 1.0 + 1e-12
        assert torch.isfinite(out.rgb).all()

    def test_render_is_deterministic(self):
        grid = RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=6)
        with torch.no_grad():
            grid.density_raw.copy_(torch.randn(grid.density_raw.shape, generator=torch.Generator().manual_seed(1)))
        a = render(grid, axis_camera(size=8))
        b = render(grid, axis_camera(size=8))
        assert torch.equal(a.rgb, b.rgb) and torch.equal(a.depth, b.depth)

    def test_voxelized_cloud_matches_gaussian_render(self):
        cloud = GaussianCloud.from_particles([particle(scale=0.4, opacity=0.5)], dtype=torch.float64)
        camera = axis_camera()
        grid = voxelize_gaussians(cloud, resolution=48)
        gaussian_rgb = render(cloud, camera).rgb
        field_rgb = render(grid, camera).rgb
        assert float((gaussian_rgb - field_rgb).abs().mean()) < 0.05


class TestGradients:
    def test_field_gradients(self):
        generator = torch.Generator().manual_seed(3)
        grid = RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=4, dtype=torch.float64)
        rays = RayBundle.from_camera(axis_camera(size=4, fov=30.0, distance=3.0), dtype=torch.float64)
        module = _RenderRays(grid, rays)
        density = torch.randn(grid.density_raw.shape, generator=generator, dtype=torch.float64, requires_grad=True)
        color = torch.randn(grid.color_logits.shape, generator=generator, dtype=torch.float64, requires_grad=True)

        def fn(d, c):
            return functional_call(module, {"scene.density_raw": d, "scene.color_logits": c}, ())

        assert torch.autograd.gradcheck(fn, (density, color), eps=1e-6, atol=1e-6, rtol=1e-3)

    def test_gaussian_gradients(self):
        cloud = GaussianCloud.from_particles(
            [
                particle(mean=(0.5, 0.1, -0.05), scale=1.0, opacity=0.4, color=(0.8, 0.1, 0.3)),
                particle(mean=(-0.5, -0.15, 0.1), scale=(0.9, 1.1, 1.0), opacity=0.6, color=(0.2, 0.5, 0.9)),
                particle(mean=(-1.5, 0.05, 0.12), scale=1.2, opacity=0.7, color=(0.4, 0.9, 0.2)),
            ],
            dtype=torch.float64,
        )
        rays = RayBundle.from_camera(axis_camera(size=4, fov=30.0, distance=4.0), dtype=torch.float64)
        module = _RenderRays(cloud, rays)
        names = ["means", "rotations", "log_scales", "opacity_logits", "color_logits"]
        inputs = tuple(getattr(cloud, n).detach().clone().requires_grad_(True) for n in names)

        def fn(*params):
            return functional_call(module, {f"scene.{n}": p for n, p in zip(names, params, strict=True)}, ())

        assert torch.autograd.gradcheck(fn, inputs, eps=1e-6, atol=1e-6, rtol=1e-3)


class TestOptimize:
    def _view(self, size=8, value=0.8):
        camera = axis_camera(size=size, fov=30.0, distance=3.0)
        return TrainingView(camera, torch.full((3, size, size), value))

    def test_zero_iterations_leave_scene_untouched(self):
        grid = RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=4)
        before = {k: v.clone() for k, v in grid.state_dict().items()}
        result = optimize_scene(grid, [self._view()], n_iters=0)
        assert result.losses == []
        assert all(torch.equal(before[k], v) for k, v in grid.state_dict().items())

    def test_fit_reduces_loss(self):
        grid = RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=8)
        result = optimize_scene(grid, [self._view()], n_iters=60, lr=0.1, seed=0)
        assert len(result.losses) == 60
        assert result.losses[-1] < 0.5 * result.losses[0]

    def test_same_seed_same_scene(self):
        grids = [RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=4) for _ in range(2)]
        for grid in grids:
            optimize_scene(grid, [self._view()], n_iters=5, rays_per_step=16, seed=7)
        assert torch.equal(grids[0].density_raw, grids[1].density_raw)

    def test_nan_target_aborts_with_diagnostics(self):
        view = self._view()
        view.image[0, 0, 0] = float("nan")
        with pytest.raises(SceneOptimizationError) as info:
            optimize_scene(RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=4), [view], n_iters=3)
        assert info.value.details["step"] == 0
        assert "density_raw" in info.value.details["parameters"]

    def test_image_size_must_match_camera(self):
        view = TrainingView(axis_camera(size=8), torch.zeros(3, 4, 4))
        with pytest.raises(ShapeMismatchError):
            optimize_scene(RadianceFieldGrid(((-1, -1, -1), (1, 1, 1)), resolution=4), [view], n_iters=1)


@pytest.mark.parametrize("kind", ["field", "cloud"])
def test_checkpoint_round_trip(tmp_path, kind):
    if kind == "field":
        scene = RadianceFieldGrid(((-1, -2, -1), (1, 2, 3)), resolution=5)
        with torch.no_grad():
            scene.density_raw.normal_()
    else:
        scene = GaussianCloud.from_particles([particle(), particle(mean=(1.0, 0.0, 0.0), scale=(0.1, 0.2, 0.3))])
    path = save_scene(tmp_path / "scene.dfx", scene)
    loaded = load_scene(path)
    assert type(loaded) is type(scene)
    for (name, a), (_, b) in zip(scene.named_parameters(), loaded.named_parameters(), strict=True):
        assert torch.equal(a.detach(), b.detach()), name
    camera = axis_camera(size=6)
    assert torch.equal(render(scene, camera).rgb, render(loaded, camera).rgb)
