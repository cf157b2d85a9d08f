"""shapeloss: learned perceptual scoring of geometry renders against face images.

A convolutional critic scores how well a gray-shaded geometry render matches
an aligned face image; the normalized score doubles as a differentiable
energy term for optimization- and regression-based 3D face fitting.
"""

from .camera import Camera, look_at
from .errors import ShapeLossError
from .geometry import (FaceParams, Mesh, MorphableModel, RegisteredScan,
                       build_pca_model, crop_face_region, evaluate_model,
                       load_model, save_model)
from .render import AlignedPair, compose_pair, render_shaded

__version__ = "0.1.0"

__all__ = [
    "Camera", "look_at", "ShapeLossError",
    "Mesh", "MorphableModel", "FaceParams", "RegisteredScan",
    "evaluate_model", "crop_face_region", "build_pca_model",
    "save_model", "load_model",
    "AlignedPair", "render_shaded", "compose_pair",
    "__version__",
]
