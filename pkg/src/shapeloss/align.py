"""Input alignment: least-squares similarity onto canonical landmark targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAlignmentError, ShapeLossError

ALIGNED_SIZE = (256, 256)
# canonical pixel targets in the 256x256 aligned frame ("left" = image left)
CANONICAL_TARGETS = {
    "left-eye-center": (89.6, 102.4),
    "right-eye-center": (166.4, 102.4),
    "mouth-center": (128.0, 192.0),
}


@dataclass(frozen=True)
class SimilarityTransform:
    """p -> scale * R(rotation) p + translation, in pixel coordinates."""

    scale: float
    rotation: float              # radians
    translation: np.ndarray      # (2,)
    output_size: tuple[int, int] = ALIGNED_SIZE  # (H, W)

    def __post_init__(self):
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=np.float64))

    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        M = np.eye(3)
        M[:2, :2] = self.scale * np.array([[c, -s], [s, c]])
        M[:2, 2] = self.translation
        return M

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        M = self.matrix()
        return pts @ M[:2, :2].T + M[:2, 2]

    def inverse(self) -> "SimilarityTransform":
        c, s = np.cos(-self.rotation), np.sin(-self.rotation)
        inv_scale = 1.0 / self.scale
        R = np.array([[c, -s], [s, c]])
        return SimilarityTransform(inv_scale, -self.rotation,
                                   -inv_scale * (R @ self.translation),
                                   self.output_size)

    @classmethod
    def identity(cls, output_size=ALIGNED_SIZE) -> "SimilarityTransform":
        return cls(1.0, 0.0, np.zeros(2), output_size)

    def to_dict(self) -> dict:
        return {"scale": float(self.scale), "rotation": float(self.rotation),
                "translation": self.translation.tolist(),
                "output_size": list(self.output_size)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimilarityTransform":
        return cls(d["scale"], d["rotation"], np.array(d["translation"]),
                   tuple(d["output_size"]))


def solve_similarity(src: np.ndarray, dst: np.ndarray,
                     output_size=ALIGNED_SIZE) -> SimilarityTransform:
    """Closed-form least-squares similarity (no reflection) src -> dst."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ShapeLossError("solve_similarity expects matching (N,2) arrays")
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    ms, md = zs.mean(), zd.mean()
    var = np.sum(np.abs(zs - ms) ** 2)
    if var < 1e-12:
        raise DegenerateAlignmentError("source landmarks coincide")
    a = np.sum((zd - md) * np.conj(zs - ms)) / var
    if np.abs(a) < 1e-12:
        raise DegenerateAlignmentError("degenerate similarity (zero scale)")
    t = md - a * ms
    return SimilarityTransform(float(np.abs(a)), float(np.angle(a)),
                               np.array([t.real, t.imag]), output_size)


def _bilinear_sample(image: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Edge-clamped bilinear sampling at float pixel-center coordinates."""
    H, W = image.shape[:2]
    fx = np.clip(x - 0.5, 0.0, W - 1.0)
    fy = np.clip(y - 0.5, 0.0, H - 1.0)
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    ax = (fx - x0)[..., None]
    ay = (fy - y0)[..., None]
    img = image if image.ndim == 3 else image[..., None]
    out = ((1 - ay) * ((1 - ax) * img[y0, x0] + ax * img[y0, x1])
           + ay * ((1 - ax) * img[y1, x0] + ax * img[y1, x1]))
    return out if image.ndim == 3 else out[..., 0]


def align_input(raw_image: np.ndarray, landmarks_2d: dict,
                output_size=ALIGNED_SIZE):
    """Resample ``raw_image`` so eye centers and mouth hit canonical targets.

    Returns (aligned image, SimilarityTransform).  The transform maps raw
    pixel coordinates to aligned pixel coordinates; the render channel is
    produced by folding the same transform into the camera, never by
    resampling.
    """
    names = ("left-eye-center", "right-eye-center", "mouth-center")
    missing = [n for n in names if n not in landmarks_2d]
    if missing:
        raise ShapeLossError(f"align_input missing landmarks: {missing}")
    src = np.array([landmarks_2d[n] for n in names], dtype=np.float64)
    area2 = abs((src[1, 0] - src[0, 0]) * (src[2, 1] - src[0, 1])
                - (src[1, 1] - src[0, 1]) * (src[2, 0] - src[0, 0]))
    span = max(np.ptp(src[:, 0]), np.ptp(src[:, 1]), 1.0)
    if area2 < 1e-6 * span * span:
        raise DegenerateAlignmentError("alignment landmarks are collinear")
    dst = np.array([CANONICAL_TARGETS[n] for n in names])
    transform = solve_similarity(src, dst, output_size=tuple(output_size))

    H, W = output_size
    cols, rows = np.meshgrid(np.arange(W), np.arange(H))
    out_pts = np.stack([cols + 0.5, rows + 0.5], axis=-1).reshape(-1, 2)
    src_pts = transform.inverse().apply(out_pts)
    aligned = _bilinear_sample(np.asarray(raw_image, dtype=np.float64),
                               src_pts[:, 0].reshape(H, W),
                               src_pts[:, 1].reshape(H, W))
    return aligned, transform
