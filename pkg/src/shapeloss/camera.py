"""Pinhole camera model (OpenCV convention: x right, y down, z forward)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeLossError

DEFAULT_FOCAL = 512.0
DEFAULT_IMAGE_SIZE = (256, 256)


@dataclass(frozen=True)
class Camera:
    """Perspective camera: u = f*x/z + cx, v = f*y/z + cy in camera frame."""

    focal_length: float = DEFAULT_FOCAL
    principal_point: tuple[float, float] = (128.0, 128.0)
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE  # (H, W)
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))  # world -> camera
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.focal_length <= 0:
            raise ShapeLossError("focal_length must be positive")
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def project(self, points: np.ndarray):
        """World points (N,3) -> pixel coords (N,2) plus camera-space depth (N,)."""
        pc = self.to_camera(np.asarray(points, dtype=np.float64))
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = self.focal_length * pc[:, :2] / z[:, None]
        uv = uv + np.asarray(self.principal_point)
        return uv, z

    def warped_by(self, transform) -> "Camera":
        """Fold a 2D similarity (pixel -> pixel) into the camera.

        A similarity s*R(phi)p + t on the image plane equals scaling the
        intrinsics and rotating the camera about its optical axis, so renders
        come out pre-aligned with no resampling.
        """
        c, s = np.cos(transform.rotation), np.sin(transform.rotation)
        rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        cx, cy = self.principal_point
        new_pp = transform.scale * (rz[:2, :2] @ np.array([cx, cy])) + transform.translation
        return Camera(
            focal_length=transform.scale * self.focal_length,
            principal_point=(float(new_pp[0]), float(new_pp[1])),
            image_size=transform.output_size,
            rotation=rz @ self.rotation,
            translation=rz @ self.translation,
        )

    def to_dict(self) -> dict:
        return {
            "focal_length": float(self.focal_length),
            "principal_point": [float(v) for v in self.principal_point],
            "image_size": [int(v) for v in self.image_size],
            "rotation": np.asarray(self.rotation).tolist(),
            "translation": np.asarray(self.translation).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(
            focal_length=d["focal_length"],
            principal_point=tuple(d["principal_point"]),
            image_size=tuple(d["image_size"]),
            rotation=np.array(d["rotation"], dtype=np.float64),
            translation=np.array(d["translation"], dtype=np.float64),
        )


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0),
            focal_length: float = DEFAULT_FOCAL,
            image_size=DEFAULT_IMAGE_SIZE) -> Camera:
    """Camera at ``eye`` looking at ``target`` with world +y treated as up."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-9:
        raise ShapeLossError("look_at: eye and target coincide")
    z = fwd / n
    x = np.cross(z, up)
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        raise ShapeLossError("look_at: viewing axis parallel to up")
    x = x / nx
    y = np.cross(z, x)  # points down in image space
    R = np.stack([x, y, z])
    H, W = image_size
    return Camera(
        focal_length=focal_length,
        principal_point=(W / 2.0, H / 2.0),
        image_size=(int(H), int(W)),
        rotation=R,
        translation=-R @ eye,
    )
