"""Small math helpers: axis-angle rotations (numpy + torch) and seeding."""

from __future__ import annotations

import numpy as np
import torch


def axis_angle_to_matrix(rvec: np.ndarray) -> np.ndarray:
    """Rodrigues formula; rvec is axis * angle (radians)."""
    rvec = np.asarray(rvec, dtype=np.float64)
    theta = np.linalg.norm(rvec)
    if theta < 1e-12:
        K = _skew(rvec)
        return np.eye(3) + K  # first-order; exact enough below 1e-12
    k = rvec / theta
    K = _skew(k)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def matrix_to_axis_angle(R: np.ndarray) -> np.ndarray:
    """Inverse Rodrigues (log map); angle in [0, pi]."""
    R = np.asarray(R, dtype=np.float64)
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    if theta < 1e-8:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    if np.pi - theta < 1e-6:
        # near pi the antisymmetric part vanishes; recover axis from R + I
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(A), 0.0, None))
        # fix signs using the largest component
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis = A[:, i] / axis[i]
        n = np.linalg.norm(axis)
        axis = axis / n if n > 0 else np.array([1.0, 0.0, 0.0])
        return axis * theta
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return axis / (2.0 * np.sin(theta)) * theta


def rotation_jacobian(rvec: np.ndarray, points: np.ndarray) -> np.ndarray:
    """d(R(rvec) @ p) / d rvec for each point; returns (N, 3, 3).

    Uses the closed-form derivative of the exponential map
    dR/dr_i = ( (r_i [r]x + [r x (I - R) e_i]x ) / |r|^2 ) R,
    with the small-angle limit dR/dr_i -> [e_i]x.
    """
    rvec = np.asarray(rvec, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    R = axis_angle_to_matrix(rvec)
    theta2 = float(rvec @ rvec)
    out = np.empty((points.shape[0], 3, 3))
    eye = np.eye(3)
    for i in range(3):
        e = eye[i]
        if theta2 < 1e-16:
            dR = _skew(e)
        else:
            v = np.cross(rvec, (eye - R) @ e)
            dR = ((rvec[i] * _skew(rvec) + _skew(v)) / theta2) @ R
        out[:, :, i] = points @ dR.T
    return out


def _skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def axis_angle_to_matrix_torch(rvec: torch.Tensor) -> torch.Tensor:
    """Differentiable Rodrigues for the fit path; rvec shape (3,)."""
    theta = torch.sqrt(rvec.pow(2).sum() + 1e-24)
    k = rvec / theta
    K = torch.stack([
        torch.stack([rvec.new_zeros(()), -k[2], k[1]]),
        torch.stack([k[2], rvec.new_zeros(()), -k[0]]),
        torch.stack([-k[1], k[0], rvec.new_zeros(())]),
    ])
    eye = torch.eye(3, dtype=rvec.dtype, device=rvec.device)
    return eye + torch.sin(theta) * K + (1.0 - torch.cos(theta)) * (K @ K)


def rng_from(*parts) -> np.random.Generator:
    """Deterministic generator from an integer seed plus context parts."""
    return np.random.default_rng(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]))


def spawn_seed(*parts) -> int:
    """Stable 63-bit integer seed derived from context parts."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
