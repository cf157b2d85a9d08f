import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapeloss.align import (CANONICAL_TARGETS, SimilarityTransform,
                             align_input, solve_similarity)
from shapeloss.camera import look_at
from shapeloss.errors import DegenerateAlignmentError


def _names():
    return ("left-eye-center", "right-eye-center", "mouth-center")


def _canonical_points():
    return np.array([CANONICAL_TARGETS[n] for n in _names()])


def _smooth_image(rng, size=256):
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.stack([
        0.5 + 0.4 * np.sin(3 * xx + 1.0) * np.cos(2 * yy),
        0.5 + 0.3 * np.cos(5 * xx * yy),
        0.5 + 0.2 * np.sin(4 * yy + 0.5),
    ], axis=-1)
    return np.clip(img + 0.02 * rng.normal(size=img.shape), 0, 1)


def test_identity_when_landmarks_canonical(rng):
    img = _smooth_image(rng)
    landmarks = {n: CANONICAL_TARGETS[n] for n in _names()}
    aligned, tf = align_input(img, landmarks)
    assert abs(tf.scale - 1.0) < 1e-9
    assert abs(tf.rotation) < 1e-9
    assert np.abs(tf.translation).max() < 1e-6
    np.testing.assert_allclose(aligned, img, atol=1e-9)


def test_rotated_input_recovers_inverse(rng):
    img = _smooth_image(rng)
    # rotate landmarks by 90 degrees about the image center
    quarter = SimilarityTransform(1.0, np.pi / 2.0,
                                  np.array([256.0, 0.0]))  # (x,y)->(-y+256, x)
    src = quarter.apply(_canonical_points())
    landmarks = dict(zip(_names(), src))
    aligned, tf = align_input(img, landmarks)
    recovered = tf.apply(src)
    assert np.abs(recovered - _canonical_points()).max() < 0.5
    assert abs(tf.rotation + np.pi / 2.0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(0.5, 2.0), rot=st.floats(-3.0, 3.0),
       tx=st.floats(-50, 50), ty=st.floats(-50, 50))
def test_procrustes_matches_linear_lstsq(scale, rot, tx, ty):
    src = SimilarityTransform(scale, rot, np.array([tx, ty])).apply(_canonical_points())
    tf = solve_similarity(src, _canonical_points())
    # independent oracle: solve for (a, b, tx, ty) with plain linear least squares
    A = np.zeros((6, 4))
    rhs = _canonical_points().reshape(-1)
    A[0::2, 0] = src[:, 0]
    A[0::2, 1] = -src[:, 1]
    A[0::2, 2] = 1.0
    A[1::2, 0] = src[:, 1]
    A[1::2, 1] = src[:, 0]
    A[1::2, 3] = 1.0
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    a, b = sol[0], sol[1]
    M = tf.matrix()
    assert abs(M[0, 0] - a) < 1e-6
    assert abs(M[1, 0] - b) < 1e-6
    assert abs(M[0, 2] - sol[2]) < 1e-6
    assert abs(M[1, 2] - sol[3]) < 1e-6


def test_alignment_equivariance(rng):
    img = _smooth_image(rng)
    base = SimilarityTransform(1.1, 0.13, np.array([-6.0, 9.0]))
    src = base.apply(_canonical_points())
    landmarks = dict(zip(_names(), src))
    aligned_a, _ = align_input(img, landmarks)

    # warp image and landmarks by a further similarity T
    T = SimilarityTransform(0.9, -0.21, np.array([12.0, -4.0]))
    H = W = 256
    cols, rows = np.meshgrid(np.arange(W), np.arange(H))
    pts = np.stack([cols + 0.5, rows + 0.5], axis=-1).reshape(-1, 2)
    src_pts = T.inverse().apply(pts)
    from shapeloss.align import _bilinear_sample
    warped = _bilinear_sample(img, src_pts[:, 0].reshape(H, W), src_pts[:, 1].reshape(H, W))
    landmarks_w = dict(zip(_names(), T.apply(src)))
    aligned_b, _ = align_input(warped, landmarks_w)
    # compare away from borders (edge clamping differs)
    diff = np.abs(aligned_a - aligned_b)[16:-16, 16:-16]
    assert diff.mean() < 2.0 / 255.0


def test_degenerate_landmarks_raise(rng):
    img = _smooth_image(rng)
    collinear = {"left-eye-center": (10.0, 10.0), "right-eye-center": (20.0, 20.0),
                 "mouth-center": (30.0, 30.0)}
    with pytest.raises(DegenerateAlignmentError):
        align_input(img, collinear)
    coincident = {n: (50.0, 50.0) for n in _names()}
    with pytest.raises(DegenerateAlignmentError):
        align_input(img, coincident)


def test_camera_warp_consistency():
    """Folding the similarity into the camera matches transforming projections."""
    cam = look_at(eye=(0.05, -0.02, 0.62), image_size=(256, 256))
    tf = SimilarityTransform(1.2, 0.3, np.array([4.0, -7.0]), output_size=(256, 256))
    warped = cam.warped_by(tf)
    rng = np.random.default_rng(5)
    pts = rng.normal(scale=0.05, size=(40, 3))
    uv, _ = cam.project(pts)
    uv_direct, _ = warped.project(pts)
    np.testing.assert_allclose(uv_direct, tf.apply(uv), atol=1e-9)
