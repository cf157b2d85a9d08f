import numpy as np
import pytest
import torch

from shapeloss import toyface
from shapeloss.camera import look_at
from shapeloss.render import camera_axis_light, raster, rasterize_torch
from shapeloss.render.raster import backward, get_kernel, rasterize

try:
    get_kernel("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernel not built")


@pytest.fixture(scope="module")
def scene():
    mesh = toyface.make_icosphere(subdivisions=2, radius=0.09)
    cam = look_at(eye=(0.03, -0.02, 0.55), image_size=(96, 96), focal_length=200.0)
    light = camera_axis_light(cam)
    return mesh, cam, light


@needs_cython
def test_forward_parity(scene):
    mesh, cam, light = scene
    a = rasterize(mesh.vertices, mesh.faces, cam, light, kernel=get_kernel("numpy"))
    b = rasterize(mesh.vertices, mesh.faces, cam, light, kernel=get_kernel("cython"))
    np.testing.assert_array_equal(a.covered, b.covered)
    np.testing.assert_array_equal(a.tri, b.tri)
    np.testing.assert_allclose(a.asum, b.asum, atol=1e-12)
    np.testing.assert_allclose(a.alpha, b.alpha, atol=1e-12)
    np.testing.assert_allclose(a.shade, b.shade, atol=1e-12)
    np.testing.assert_allclose(a.w_aff, b.w_aff, atol=1e-12)


@needs_cython
def test_backward_parity(scene, rng):
    mesh, cam, light = scene
    g_shade = rng.normal(size=(96, 96))
    g_alpha = rng.normal(size=(96, 96))
    outs = []
    for name in ("numpy", "cython"):
        state = rasterize(mesh.vertices, mesh.faces, cam, light, kernel=get_kernel(name))
        outs.append(backward(state, g_shade=g_shade, g_alpha=g_alpha,
                             kernel=get_kernel(name)))
    scale = np.abs(outs[0]).max()
    np.testing.assert_allclose(outs[0], outs[1], atol=1e-9 * max(scale, 1.0))


def test_attribute_interpolation(scene, rng):
    mesh, cam, light = scene
    attrs = rng.uniform(size=(mesh.n_vertices, 3))
    state = rasterize(mesh.vertices, mesh.faces, cam, light, attrs=attrs)
    mask = state.tri >= 0
    assert state.attr.shape == (96, 96, 3)
    vals = state.attr[mask]
    assert vals.min() >= attrs.min() - 1e-9
    assert vals.max() <= attrs.max() + 1e-9
    # constant attributes interpolate to the constant
    const = np.full((mesh.n_vertices, 2), 0.625)
    state2 = rasterize(mesh.vertices, mesh.faces, cam, light, attrs=const)
    np.testing.assert_allclose(state2.attr[mask], 0.625, atol=1e-12)


def test_torch_bridge_matches_numpy(scene):
    mesh, cam, light = scene
    vt = torch.from_numpy(mesh.vertices.copy())
    shade, attr, alpha = rasterize_torch(vt, mesh.faces, cam, light)
    state = rasterize(mesh.vertices, mesh.faces, cam, light)
    np.testing.assert_allclose(shade.numpy(), state.shade, atol=1e-12)
    np.testing.assert_allclose(alpha.numpy(), state.alpha, atol=1e-12)
    assert attr.shape == (96, 96, 0)


def test_torch_bridge_gradients_match_fd(scene):
    mesh, cam, light = scene
    coarse = toyface.make_icosphere(subdivisions=1, radius=0.09)
    vt = torch.from_numpy(coarse.vertices.copy()).requires_grad_(True)
    wimg = torch.from_numpy(np.random.default_rng(3).normal(size=(96, 96)))
    walpha = torch.from_numpy(np.random.default_rng(4).normal(size=(96, 96)))

    def loss_of(v):
        shade, _, alpha = rasterize_torch(v, coarse.faces, cam, light)
        return (wimg * shade * alpha).sum() + (walpha * alpha).sum()

    loss = loss_of(vt)
    loss.backward()
    g = vt.grad.numpy()
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(6):
        vid = int(rng.integers(coarse.n_vertices))
        axis = int(rng.integers(3))
        vp = coarse.vertices.copy()
        vp[vid, axis] += h
        vm = coarse.vertices.copy()
        vm[vid, axis] -= h
        fp = float(loss_of(torch.from_numpy(vp)))
        fm = float(loss_of(torch.from_numpy(vm)))
        fd = (fp - fm) / (2 * h)
        denom = max(abs(fd), abs(g[vid, axis]), 1e-3)
        assert abs(g[vid, axis] - fd) / denom < 2e-2, (vid, axis, g[vid, axis], fd)
