"""Differentiable rasterization: backend selection, shading, backward chain.

The per-pixel heavy loops (coverage + soft-silhouette alpha) live in a kernel
backend: the compiled ``_raster_cy`` extension when importable, otherwise the
pure-numpy ``_raster_np`` module.  Override with the environment variable
``SHAPELOSS_RASTER_BACKEND=numpy|cython``.

Shading model: perspective-correct barycentric interpolation of unit vertex
normals, single directional light, intensity = max(0, n.l).  Optional
per-vertex attributes (e.g. albedo colors) are interpolated the same way.
Outputs are *unpremultiplied* fields plus the alpha image; callers compose
``alpha * value + (1 - alpha) * background`` so gradients flow through both
shading and silhouette position.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..camera import Camera
from ..errors import EmptyRenderError
from . import _raster_np

DEFAULT_SIGMA = 0.25   # sigmoid width (px) -> ~1 px silhouette band
DEFAULT_BAND = 6.0     # distance cutoff (px); exp(-band/sigma) stays below the snap eps
DEFAULT_ZNEAR = 0.05
SATURATION_EPS = 1e-9  # asum >= 1 - eps snaps alpha to exactly 1

_FORCED = os.environ.get("SHAPELOSS_RASTER_BACKEND", "").strip().lower()
if _FORCED == "numpy":
    _kernel = _raster_np
elif _FORCED == "cython":
    from . import _raster_cy as _kernel  # noqa: F401  (raises if not built)
else:
    try:
        from . import _raster_cy as _kernel
    except ImportError:
        _kernel = _raster_np

BACKEND = _kernel.BACKEND


def get_kernel(backend: str | None = None):
    """Kernel module for ``backend`` (None -> the selected default)."""
    if backend is None:
        return _kernel
    if backend == "numpy":
        return _raster_np
    if backend == "cython":
        from . import _raster_cy
        return _raster_cy
    raise ValueError(f"unknown raster backend {backend!r}")


def vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted unit vertex normals."""
    v = np.asarray(vertices, dtype=np.float64)
    fn = np.cross(v[faces[:, 1]] - v[faces[:, 0]], v[faces[:, 2]] - v[faces[:, 0]])
    acc = np.zeros_like(v)
    for k in range(3):
        np.add.at(acc, faces[:, k], fn)
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.maximum(norm, 1e-12)


@dataclass
class RasterState:
    """Everything saved by a forward pass that the backward chain needs."""

    vertices: np.ndarray
    faces: np.ndarray
    camera: Camera
    light: np.ndarray          # unit world-space direction toward the light
    attrs: np.ndarray | None
    sigma: float
    band: float
    screen: np.ndarray
    zcam: np.ndarray
    nhat: np.ndarray
    tri: np.ndarray            # merged shading triangle per pixel (-1 none)
    w_aff: np.ndarray          # (H, W, 3) affine barycentrics for `tri`
    covered: np.ndarray        # uint8 hard coverage
    asum: np.ndarray
    alpha: np.ndarray
    shade: np.ndarray          # (H, W) unpremultiplied relu(n.l)
    attr: np.ndarray | None    # (H, W, K) unpremultiplied
    # per-pixel intermediates over the masked pixel list
    _mask: np.ndarray
    _cov_rows: np.ndarray      # which masked pixels are hard-covered
    _wv_used: np.ndarray       # barycentrics actually shaded with (clamped on band)
    _pw: np.ndarray
    _n: np.ndarray
    _m: np.ndarray
    _cos: np.ndarray


def rasterize(vertices, faces, camera: Camera, light, attrs=None,
              sigma: float = DEFAULT_SIGMA, band: float = DEFAULT_BAND,
              znear: float = DEFAULT_ZNEAR, kernel=None) -> RasterState:
    """Forward rasterization of a world-space mesh through ``camera``."""
    kern = kernel if kernel is not None else _kernel
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int32)
    light = np.asarray(light, dtype=np.float64)
    H, W = camera.image_size
    screen, zcam = camera.project(vertices)
    faces_ok = faces[np.all(zcam[faces] > znear, axis=1)]
    if len(faces_ok) == 0:
        raise EmptyRenderError("no triangle in front of the camera")

    out = kern.forward_cover(np.ascontiguousarray(screen),
                             np.ascontiguousarray(zcam),
                             faces_ok, H, W, float(sigma), float(band))
    covered = out["covered"].astype(bool)
    tri = np.where(covered, out["tri_cov"], out["tri_band"])
    w0 = np.where(covered, out["w0_cov"], out["w0_band"])
    w1 = np.where(covered, out["w1_cov"], out["w1_band"])
    w_aff = np.stack([w0, w1, 1.0 - w0 - w1], axis=-1)
    # adjacent-triangle sigmoids sum to 1 only up to rounding across shared
    # edges; snap so fully-covered pixels carry exactly zero background
    alpha = np.minimum(out["asum"], 1.0)
    alpha[out["asum"] >= 1.0 - SATURATION_EPS] = 1.0

    # normals from the same culled face set the backward chain walks
    nhat = vertex_normals(vertices, faces_ok)
    mask = tri >= 0
    shade = np.zeros((H, W))
    attr_img = None
    attrs_arr = None
    if attrs is not None:
        attrs_arr = np.ascontiguousarray(attrs, dtype=np.float64)
        attr_img = np.zeros((H, W, attrs_arr.shape[1]))

    corner = faces_ok[tri[mask]]            # (P, 3) vertex ids
    wv = w_aff[mask]                        # (P, 3)
    cov_rows = covered[mask]
    # outside the hard coverage, unclamped extrapolation explodes for small
    # triangles; clamp band pixels to the nearest boundary point instead
    # (treated as constants in the backward pass -- the silhouette gradient
    # there flows through alpha)
    wv_used = wv.copy()
    if (~cov_rows).any():
        clamped = np.clip(wv[~cov_rows], 0.0, None)
        ssum = np.maximum(clamped.sum(axis=1, keepdims=True), 1e-12)
        wv_used[~cov_rows] = clamped / ssum
    zc = zcam[corner]                       # (P, 3)
    u = wv_used / zc
    S = u.sum(axis=1, keepdims=True)
    pw = u / S                              # perspective-correct weights
    n = np.einsum("pk,pkd->pd", pw, nhat[corner])
    m = np.maximum(np.linalg.norm(n, axis=1), 1e-12)
    cos = (n @ light) / m
    shade[mask] = np.maximum(cos, 0.0)
    if attrs_arr is not None:
        attr_img[mask] = np.einsum("pk,pkd->pd", pw, attrs_arr[corner])

    return RasterState(
        vertices=vertices, faces=faces_ok, camera=camera, light=light,
        attrs=attrs_arr, sigma=float(sigma), band=float(band),
        screen=screen, zcam=zcam, nhat=nhat, tri=tri, w_aff=w_aff,
        covered=out["covered"], asum=out["asum"], alpha=alpha,
        shade=shade, attr=attr_img,
        _mask=mask, _cov_rows=cov_rows, _wv_used=wv_used,
        _pw=pw, _n=n, _m=m, _cos=cos,
    )


def _bary_gradients(state: RasterState, g_w: np.ndarray) -> np.ndarray:
    """Chain dL/d(affine barycentrics) to dL/d(screen coords).

    ``g_w`` is (P, 3) over the masked pixels of ``state.tri``; affine
    barycentrics are quotients of 2D cross products of the corner screen
    positions, differentiated per corner with the quotient rule.
    """
    H, W = state.camera.image_size
    mask = state._mask
    rows, cols = np.nonzero(mask)
    px = cols + 0.5
    py = rows + 0.5
    corner = state.faces[state.tri[mask]]
    a = state.screen[corner[:, 0]]
    b = state.screen[corner[:, 1]]
    c = state.screen[corner[:, 2]]
    den = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
           - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    wv = state.w_aff[mask]

    def perp(u):  # (x, y) -> (-y, x)
        return np.stack([-u[:, 1], u[:, 0]], axis=1)

    p = np.stack([px, py], axis=1)
    # d numer_k / d corner and d den / d corner, as derived with the
    # quotient rule; numer_a = cross(c - b, p - b) etc.
    dden = (perp(c - b), perp(a - c), perp(b - a))  # wrt a, b, c
    g_screen = np.zeros_like(state.screen)
    numers = (("a", (1, 2)), ("b", (2, 0)), ("c", (0, 1)))
    for k, (_, (qi, ri)) in enumerate(numers):
        gk = g_w[:, k] / den
        # numer_k depends on corners qi and ri only: grad = perp(p - other)
        q = (a, b, c)[qi]
        r = (a, b, c)[ri]
        gq = perp(p - r) * gk[:, None]
        gr = -perp(p - q) * gk[:, None]
        np.add.at(g_screen, corner[:, qi], gq)
        np.add.at(g_screen, corner[:, ri], gr)
        # quotient rule: -w_k/den * dden
        for ci in range(3):
            gden = (-g_w[:, k] * wv[:, k] / den)[:, None] * dden[ci]
            np.add.at(g_screen, corner[:, ci], gden)
    return g_screen


def backward(state: RasterState, g_shade=None, g_attr=None, g_alpha=None,
             kernel=None) -> np.ndarray:
    """dL/d(world vertices) given upstream grads on shade/attr/alpha images."""
    kern = kernel if kernel is not None else _kernel
    H, W = state.camera.image_size
    mask = state._mask
    corner = state.faces[state.tri[mask]]
    pw = state._pw
    n = state._n
    m = state._m
    nunit = n / m[:, None]
    P = len(pw)

    g_pw = np.zeros((P, 3))
    g_nhat = np.zeros_like(state.nhat)
    g_z = np.zeros_like(state.zcam)

    # shading chain
    if g_shade is not None:
        gs = g_shade[mask] * (state._cos > 0.0)
        g_nunit = gs[:, None] * state.light[None, :]
        g_n = (g_nunit - (g_nunit * nunit).sum(axis=1, keepdims=True) * nunit) / m[:, None]
        contrib = pw[:, :, None] * g_n[:, None, :]
        for k in range(3):
            np.add.at(g_nhat, corner[:, k], contrib[:, k])
        g_pw += np.einsum("pkd,pd->pk", state.nhat[corner], g_n)

    # attribute chain
    if g_attr is not None and state.attrs is not None:
        ga = g_attr[mask]
        g_pw += np.einsum("pkd,pd->pk", state.attrs[corner], ga)

    # perspective weights -> affine barycentrics and corner depths; band
    # pixels used clamped weights and contribute nothing through this path
    zc = state.zcam[corner]
    u = state._wv_used / zc
    S = u.sum(axis=1, keepdims=True)
    g_u = (g_pw - (g_pw * pw).sum(axis=1, keepdims=True)) / S
    g_w = g_u / zc
    g_zc = -g_u * state._wv_used / (zc * zc)
    g_w[~state._cov_rows] = 0.0
    g_zc[~state._cov_rows] = 0.0
    for k in range(3):
        np.add.at(g_z, corner[:, k], g_zc[:, k])

    g_screen = _bary_gradients(state, g_w)

    # silhouette alpha chain (saturated pixels contribute nothing)
    if g_alpha is not None:
        g_asum = np.where(state.asum < 1.0 - SATURATION_EPS, g_alpha, 0.0)
        if np.any(g_asum != 0.0):
            g_screen += kern.backward_alpha(
                np.ascontiguousarray(state.screen), state.faces, H, W,
                state.sigma, state.band, np.ascontiguousarray(g_asum))

    # projection chain: screen and camera-depth grads -> world vertices
    cam = state.camera
    pc = cam.to_camera(state.vertices)
    f = cam.focal_length
    z = pc[:, 2]
    g_cam = np.zeros_like(pc)
    g_cam[:, 0] = g_screen[:, 0] * f / z
    g_cam[:, 1] = g_screen[:, 1] * f / z
    g_cam[:, 2] = (-f * (pc[:, 0] * g_screen[:, 0] + pc[:, 1] * g_screen[:, 1]) / (z * z)
                   + g_z)
    g_world = g_cam @ cam.rotation

    # vertex-normal chain: nhat = N/|N|, N = sum of incident face crosses
    if np.any(g_nhat != 0.0):
        v = state.vertices
        fn = np.cross(v[state.faces[:, 1]] - v[state.faces[:, 0]],
                      v[state.faces[:, 2]] - v[state.faces[:, 0]])
        acc = np.zeros_like(v)
        for k in range(3):
            np.add.at(acc, state.faces[:, k], fn)
        Nnorm = np.maximum(np.linalg.norm(acc, axis=1, keepdims=True), 1e-12)
        nh = acc / Nnorm
        g_N = (g_nhat - (g_nhat * nh).sum(axis=1, keepdims=True) * nh) / Nnorm
        G = g_N[state.faces[:, 0]] + g_N[state.faces[:, 1]] + g_N[state.faces[:, 2]]
        e1 = v[state.faces[:, 1]] - v[state.faces[:, 0]]
        e2 = v[state.faces[:, 2]] - v[state.faces[:, 0]]
        g_e1 = np.cross(e2, G)
        g_e2 = np.cross(G, e1)
        np.add.at(g_world, state.faces[:, 1], g_e1)
        np.add.at(g_world, state.faces[:, 2], g_e2)
        np.add.at(g_world, state.faces[:, 0], -(g_e1 + g_e2))

    return g_world
