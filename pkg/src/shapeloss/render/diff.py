"""Torch bridge for the rasterizer: gradients flow from images to vertices."""

from __future__ import annotations

import numpy as np
import torch

from . import raster


class _Rasterize(torch.autograd.Function):
    """Wraps the numpy/Cython rasterizer as a torch op.

    Inputs: world-space vertices (V, 3).  Outputs: unpremultiplied shade
    image (H, W), attribute image (H, W, K; zero-width if no attributes) and
    the silhouette alpha (H, W).
    """

    @staticmethod
    def forward(ctx, vertices: torch.Tensor, spec: dict):
        state = raster.rasterize(
            vertices.detach().cpu().numpy(), spec["faces"], spec["camera"],
            spec["light"], attrs=spec.get("attrs"),
            sigma=spec.get("sigma", raster.DEFAULT_SIGMA),
            band=spec.get("band", raster.DEFAULT_BAND),
            kernel=spec.get("kernel"),
        )
        ctx.state = state
        ctx.kernel = spec.get("kernel")
        ctx.dtype = vertices.dtype
        H, W = state.camera.image_size
        attr = state.attr if state.attr is not None else np.zeros((H, W, 0))
        to = lambda a: torch.from_numpy(np.ascontiguousarray(a)).to(vertices.dtype)
        return to(state.shade), to(attr), to(state.alpha)

    @staticmethod
    def backward(ctx, g_shade, g_attr, g_alpha):
        state = ctx.state
        g_world = raster.backward(
            state,
            g_shade=None if g_shade is None else g_shade.detach().cpu().numpy().astype(np.float64),
            g_attr=None if (g_attr is None or state.attr is None)
            else g_attr.detach().cpu().numpy().astype(np.float64),
            g_alpha=None if g_alpha is None else g_alpha.detach().cpu().numpy().astype(np.float64),
            kernel=ctx.kernel,
        )
        return torch.from_numpy(g_world).to(ctx.dtype), None


def rasterize_torch(vertices: torch.Tensor, faces, camera, light, attrs=None,
                    sigma: float = raster.DEFAULT_SIGMA,
                    band: float = raster.DEFAULT_BAND, kernel=None):
    """Differentiable (shade, attr, alpha) images from torch vertices."""
    spec = {"faces": np.ascontiguousarray(faces, dtype=np.int32),
            "camera": camera, "light": np.asarray(light, dtype=np.float64),
            "attrs": None if attrs is None else np.asarray(attrs, dtype=np.float64),
            "sigma": sigma, "band": band, "kernel": kernel}
    return _Rasterize.apply(vertices, spec)
