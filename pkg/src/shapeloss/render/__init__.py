"""Gray-shaded differentiable rendering and critic input composition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import Camera
from ..errors import EmptyRenderError, ShapeLossError
from ..geometry import Mesh
from . import raster
from .diff import rasterize_torch
from .raster import BACKEND, RasterState, get_kernel, rasterize, vertex_normals

DEFAULT_ALBEDO = 0.8

__all__ = [
    "AlignedPair", "RenderResult", "render_shaded", "compose_pair",
    "background_noise", "camera_axis_light", "rasterize", "rasterize_torch",
    "vertex_normals", "RasterState", "BACKEND", "get_kernel", "DEFAULT_ALBEDO",
]


def camera_axis_light(camera: Camera) -> np.ndarray:
    """Directional light along the viewing axis (from the face toward the camera)."""
    return -camera.rotation[2]


@dataclass
class RenderResult:
    """Shaded render plus silhouette alpha and derivative access."""

    image: np.ndarray          # (H, W) premultiplied: alpha * albedo * relu(n.l)
    alpha: np.ndarray          # (H, W) soft coverage in [0, 1]
    covered: np.ndarray        # (H, W) bool hard coverage
    albedo: float
    state: RasterState

    def vertex_gradient(self, g_image: np.ndarray, g_alpha=None) -> np.ndarray:
        """d(sum(g_image * image) [+ sum(g_alpha * alpha)]) / d(world vertices)."""
        g_image = np.asarray(g_image, dtype=np.float64)
        g_shade = g_image * self.alpha * self.albedo
        g_a = g_image * self.albedo * self.state.shade
        if g_alpha is not None:
            g_a = g_a + np.asarray(g_alpha, dtype=np.float64)
        return raster.backward(self.state, g_shade=g_shade, g_alpha=g_a)


def render_shaded(mesh: Mesh, camera: Camera, light_direction,
                  albedo: float = DEFAULT_ALBEDO, sigma: float = raster.DEFAULT_SIGMA,
                  band: float = raster.DEFAULT_BAND) -> RenderResult:
    """Gray Lambertian render; uncovered pixels stay at the 0 sentinel."""
    if mesh.n_vertices == 0 or len(mesh.faces) == 0:
        raise EmptyRenderError("empty mesh")
    light = np.asarray(light_direction, dtype=np.float64)
    if abs(np.linalg.norm(light) - 1.0) > 1e-6:
        raise ShapeLossError("light_direction must be unit norm")
    state = raster.rasterize(mesh.vertices, mesh.faces, camera, light,
                             sigma=sigma, band=band)
    image = state.alpha * albedo * state.shade
    return RenderResult(image=image, alpha=state.alpha,
                        covered=state.covered.astype(bool),
                        albedo=albedo, state=state)


def background_noise(shape, seed: int) -> np.ndarray:
    """The uniform [0,1) background field for a given noise seed."""
    return np.random.Generator(np.random.PCG64(seed)).random(shape)


@dataclass
class AlignedPair:
    """The critic's 4-channel input: aligned RGB image + gray render."""

    image: np.ndarray                  # (H, W, 3) in [0, 1]
    render: np.ndarray                 # (H, W, 1) in [0, 1], noise background
    alignment: object = None           # SimilarityTransform or None
    noise_seed: int | None = None

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ShapeLossError(f"pair image must be (H,W,3), got {self.image.shape}")
        if self.render.shape != self.image.shape[:2] + (1,):
            raise ShapeLossError("pair render must be (H,W,1) matching the image")

    def channels(self) -> np.ndarray:
        """(4, H, W) float32 stack: RGB image then the render channel."""
        img = np.moveaxis(self.image, -1, 0)
        return np.concatenate([img, np.moveaxis(self.render, -1, 0)],
                              axis=0).astype(np.float32)


def compose_pair(image: np.ndarray, mesh: Mesh, camera: Camera, noise_seed: int,
                 albedo: float = DEFAULT_ALBEDO, alignment=None,
                 light_direction=None) -> AlignedPair:
    """Render ``mesh`` (already face-cropped) and fill background with noise.

    The light defaults to the camera viewing axis.  Blending uses the soft
    silhouette alpha: render = alpha * shaded + (1 - alpha) * noise.
    """
    image = np.asarray(image, dtype=np.float64)
    H, W = camera.image_size
    if image.shape[:2] != (H, W):
        raise ShapeLossError("image size does not match the camera")
    light = camera_axis_light(camera) if light_direction is None else light_direction
    res = render_shaded(mesh, camera, light, albedo=albedo)
    noise = background_noise((H, W), noise_seed)
    render = res.image + (1.0 - res.alpha) * noise
    return AlignedPair(image=image, render=render[..., None],
                       alignment=alignment, noise_seed=noise_seed)
