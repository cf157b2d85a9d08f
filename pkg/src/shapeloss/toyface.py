"""Procedural face-like geometry: template, deformation fields, scan corpus.

Stands in for a studio scan dataset: a parametric face shell (dome plus
nose/brow/lip/chin features) deformed by smooth per-subject identity fields
and localized per-expression fields.  All sizes are in meters at roughly
human face scale.
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, RegisteredScan
from .mathutil import rng_from

FACE_HALF_WIDTH = 0.085
FACE_HALF_HEIGHT = 0.110
DEFAULT_RESOLUTION = 36

# parametric (s, t) positions of the named landmarks; t is up
_LANDMARK_ST = {
    "outer-left-eye": (-0.56, 0.28),
    "outer-right-eye": (0.56, 0.28),
    "left-eye-center": (-0.38, 0.28),
    "right-eye-center": (0.38, 0.28),
    "nose-tip": (0.0, -0.05),
    "mouth-center": (0.0, -0.42),
}
_N_CONTOUR = 12


def _bump(s, t, cs, ct, ws, wt):
    return np.exp(-((s - cs) / ws) ** 2 - ((t - ct) / wt) ** 2)


def _base_height(s, t):
    """Face shell height field z(s, t) with fixed anatomical features."""
    r2 = (s / 1.02) ** 2 + (t / 1.02) ** 2
    z = 0.055 * np.sqrt(np.clip(1.0 - r2, 0.0, None))
    z += 0.030 * _bump(s, t, 0.0, -0.05, 0.15, 0.26)          # nose ridge
    z += 0.006 * _bump(s, t, 0.0, 0.44, 0.55, 0.14)           # brow
    z -= 0.010 * _bump(s, t, -0.38, 0.28, 0.16, 0.10)         # eye sockets
    z -= 0.010 * _bump(s, t, 0.38, 0.28, 0.16, 0.10)
    z += 0.008 * _bump(s, t, 0.0, -0.42, 0.26, 0.08)          # lips
    z += 0.010 * _bump(s, t, 0.0, -0.82, 0.28, 0.18)          # chin
    z += 0.006 * _bump(s, t, -0.52, -0.12, 0.22, 0.28)        # cheeks
    z += 0.006 * _bump(s, t, 0.52, -0.12, 0.22, 0.28)
    return z


def make_template(resolution: int = DEFAULT_RESOLUTION) -> Mesh:
    """Face template on a resolution x resolution grid; front is +z, up is +y."""
    n = int(resolution)
    if n < 8:
        raise ValueError("resolution must be at least 8")
    lin = np.linspace(-1.0, 1.0, n)
    t_grid, s_grid = np.meshgrid(lin, lin, indexing="ij")  # row-major: t rows
    s = s_grid.reshape(-1)
    t = t_grid.reshape(-1)
    verts = np.stack([FACE_HALF_WIDTH * s, FACE_HALF_HEIGHT * t, _base_height(s, t)], axis=1)

    faces = []
    for r in range(n - 1):
        for c in range(n - 1):
            v00 = r * n + c
            v01 = v00 + 1
            v10 = v00 + n
            v11 = v10 + 1
            faces.append((v00, v10, v01))
            faces.append((v01, v10, v11))
    faces = np.array(faces, dtype=np.int32)

    def nearest(cs, ct):
        return int(np.argmin((s - cs) ** 2 + (t - ct) ** 2))

    landmarks = {}
    taken = set()
    for name, (cs, ct) in _LANDMARK_ST.items():
        idx = nearest(cs, ct)
        if idx in taken:  # coarse grids: nudge to the next-closest free node
            order = np.argsort((s - cs) ** 2 + (t - ct) ** 2)
            idx = int(next(i for i in order if int(i) not in taken))
        taken.add(idx)
        landmarks[name] = idx
    for k in range(_N_CONTOUR):
        ang = 2.0 * np.pi * k / _N_CONTOUR
        idx = nearest(0.92 * np.cos(ang), 0.92 * np.sin(ang))
        if idx in taken:
            order = np.argsort((s - 0.92 * np.cos(ang)) ** 2 + (t - 0.92 * np.sin(ang)) ** 2)
            idx = int(next(i for i in order if int(i) not in taken))
        taken.add(idx)
        landmarks[f"contour-{k:02d}"] = idx

    # static interior-exclusion list: small disks at the eye centers and mouth;
    # landmark vertices stay (they anchor cropping and must survive it)
    excluded = set()
    for cs, ct, rad in ((-0.38, 0.28, 0.055), (0.38, 0.28, 0.055), (0.0, -0.42, 0.05)):
        excluded.update(np.nonzero((s - cs) ** 2 + (t - ct) ** 2 < rad ** 2)[0].tolist())
    excluded -= taken
    excluded = np.array(sorted(excluded), dtype=np.int64)

    return Mesh(verts, faces, landmarks, excluded)


def _smooth_field(s, t, rng, n_bumps, amplitude, width_range):
    """Random smooth scalar field: sum of gaussian bumps over the face."""
    field = np.zeros_like(s)
    for _ in range(n_bumps):
        cs, ct = rng.uniform(-0.9, 0.9, size=2)
        ws = rng.uniform(*width_range)
        wt = rng.uniform(*width_range)
        field += rng.normal(0.0, amplitude) * _bump(s, t, cs, ct, ws, wt)
    return field


def _identity_offset(s, t, rng):
    """Per-subject shape change, a few mm to ~1 cm, mostly along z plus scaling."""
    dz = np.zeros_like(s)
    dz += rng.normal(0.0, 0.006) * _bump(s, t, 0.0, -0.05, 0.16, 0.28)   # nose size
    dz += rng.normal(0.0, 0.004) * _bump(s, t, 0.0, 0.44, 0.5, 0.16)     # brow
    dz += rng.normal(0.0, 0.005) * _bump(s, t, 0.0, -0.82, 0.3, 0.2)     # chin
    dz += rng.normal(0.0, 0.004) * (_bump(s, t, -0.52, -0.12, 0.25, 0.3)
                                    + _bump(s, t, 0.52, -0.12, 0.25, 0.3))  # cheeks
    dz += _smooth_field(s, t, rng, 6, 0.003, (0.25, 0.6))
    dx = FACE_HALF_WIDTH * s * rng.normal(0.0, 0.05)    # width scaling
    dy = FACE_HALF_HEIGHT * t * rng.normal(0.0, 0.05)   # height scaling
    return np.stack([dx, dy, dz], axis=1)


def _expression_offset(s, t, rng):
    """Per-expression change, localized around mouth/brows, up to ~1.2 cm."""
    dz = np.zeros_like(s)
    dy = np.zeros_like(s)
    smile = rng.normal(0.0, 0.008)
    dy += smile * (_bump(s, t, -0.30, -0.42, 0.14, 0.12) + _bump(s, t, 0.30, -0.42, 0.14, 0.12))
    jaw = rng.normal(0.0, 0.008)
    dy -= np.abs(jaw) * _bump(s, t, 0.0, -0.70, 0.4, 0.3)      # jaw drop
    dz += rng.normal(0.0, 0.006) * _bump(s, t, 0.0, -0.42, 0.2, 0.1)   # pucker
    dz += rng.normal(0.0, 0.004) * _bump(s, t, 0.0, 0.44, 0.5, 0.14)   # brow raise
    dz += _smooth_field(s, t, rng, 4, 0.003, (0.15, 0.4))
    dx = np.zeros_like(s)
    return np.stack([dx, dy, dz], axis=1)


def make_scan_corpus(template: Mesh, n_subjects: int, n_expressions: int,
                     seed: int) -> list[RegisteredScan]:
    """Registered synthetic scans: per subject a neutral plus expression meshes.

    expression_id 0 is the neutral scan; ids 1..n_expressions-1 add an
    expression offset on top of the subject's neutral.
    """
    s = template.vertices[:, 0] / FACE_HALF_WIDTH
    t = template.vertices[:, 1] / FACE_HALF_HEIGHT
    scans = []
    for subj in range(n_subjects):
        rng = rng_from(seed, 101, subj)
        neutral = template.vertices + _identity_offset(s, t, rng)
        scans.append(RegisteredScan(subj, 0, template.with_vertices(neutral)))
        for expr in range(1, n_expressions):
            erng = rng_from(seed, 202, subj, expr)
            scans.append(RegisteredScan(
                subj, expr, template.with_vertices(neutral + _expression_offset(s, t, erng))))
    return scans


def make_icosphere(subdivisions: int = 1, radius: float = 1.0) -> Mesh:
    """Icosphere test mesh (42 vertices at one subdivision); no landmarks."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return Mesh(radius * np.array(verts), np.array(faces, dtype=np.int32))
