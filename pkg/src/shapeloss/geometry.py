"""Meshes, the PCA morphable face model, and the pre-render cropping rule."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import load_container, save_container
from .errors import (EmptyRegionError, ParameterShapeError, RankError,
                     ShapeLossError, TopologyError)
from .mathutil import axis_angle_to_matrix, rotation_jacobian

# landmark names every template must provide
CORE_LANDMARKS = (
    "outer-left-eye", "outer-right-eye",
    "left-eye-center", "right-eye-center",
    "nose-tip", "mouth-center",
)
CROP_FACTOR = 0.7


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh with named semantic landmarks.

    ``excluded_vertices`` is the static per-topology list of mouth/eye
    interior vertices that the cropping rule removes along with the distance
    filter.  Arrays are frozen after construction; operations return new
    meshes.
    """

    vertices: np.ndarray                 # (V, 3) float64, model units (~meters)
    faces: np.ndarray                    # (F, 3) int32
    landmark_indices: dict[str, int] = field(default_factory=dict)
    excluded_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int32))
        ex = np.asarray(self.excluded_vertices, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ShapeLossError(f"vertices must be (V,3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ShapeLossError(f"faces must be (F,3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ShapeLossError("face index out of range")
        if f.size:
            a, b, c = f[:, 0], f[:, 1], f[:, 2]
            if np.any((a == b) | (b == c) | (a == c)):
                raise ShapeLossError("degenerate face with repeated vertex index")
        for name, idx in self.landmark_indices.items():
            if not 0 <= int(idx) < len(v):
                raise ShapeLossError(f"landmark {name} index {idx} out of range")
        idxs = list(self.landmark_indices.values())
        if len(set(idxs)) != len(idxs):
            raise ShapeLossError("landmark indices must be distinct")
        for arr in (v, f, ex):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "excluded_vertices", ex)
        object.__setattr__(self, "landmark_indices", dict(self.landmark_indices))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def landmark_positions(self, names=None) -> np.ndarray:
        names = list(names) if names is not None else sorted(self.landmark_indices)
        return self.vertices[[self.landmark_indices[n] for n in names]]

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices, self.faces, self.landmark_indices, self.excluded_vertices)

    def topology_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n_vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class FaceParams:
    """Identity/expression coefficients plus 6-dof pose (axis-angle + translation)."""

    beta: np.ndarray
    psi: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("beta", "psi", "rotation", "translation"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise ShapeLossError(f"non-finite values in {name}")
            object.__setattr__(self, name, arr)
        if self.rotation.shape != (3,) or self.translation.shape != (3,):
            raise ShapeLossError("pose must be 3 rotation + 3 translation values")

    @classmethod
    def zeros(cls, model: "MorphableModel") -> "FaceParams":
        return cls(np.zeros(model.n_id), np.zeros(model.n_exp))

    def theta(self) -> np.ndarray:
        return np.concatenate([self.rotation, self.translation])

    def to_dict(self) -> dict:
        return {"beta": self.beta.tolist(), "psi": self.psi.tolist(),
                "rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FaceParams":
        return cls(np.array(d["beta"]), np.array(d["psi"]),
                   np.array(d["rotation"]), np.array(d["translation"]))


@dataclass(frozen=True)
class MorphableModel:
    """Linear face model: vertices(beta, psi) = mean + B_id beta + B_exp psi.

    Basis matrices are (3V, n) with orthonormal columns; ``*_stddevs`` carry
    the per-component standard deviations used for regularization scaling.
    """

    template: Mesh
    mean: np.ndarray             # (3V,)
    identity_basis: np.ndarray   # (3V, n_id)
    expression_basis: np.ndarray  # (3V, n_exp)
    identity_stddevs: np.ndarray
    expression_stddevs: np.ndarray

    def __post_init__(self):
        for name in ("mean", "identity_basis", "expression_basis",
                     "identity_stddevs", "expression_stddevs"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        v3 = 3 * self.template.n_vertices
        if self.mean.shape != (v3,):
            raise ShapeLossError("mean length must be 3 * vertex count")
        if self.identity_basis.shape[0] != v3 or self.expression_basis.shape[0] != v3:
            raise ShapeLossError("basis row count must be 3 * vertex count")

    @property
    def n_id(self) -> int:
        return self.identity_basis.shape[1]

    @property
    def n_exp(self) -> int:
        return self.expression_basis.shape[1]

    def mean_mesh(self) -> Mesh:
        return self.template.with_vertices(self.mean.reshape(-1, 3))


def evaluate_model(model: MorphableModel, params: FaceParams) -> Mesh:
    """Model function: rotate the morphed shape, then translate."""
    if params.beta.shape != (model.n_id,) or params.psi.shape != (model.n_exp,):
        raise ParameterShapeError(
            f"expected beta ({model.n_id},) psi ({model.n_exp},), got "
            f"{params.beta.shape} {params.psi.shape}")
    shaped = (model.mean
              + model.identity_basis @ params.beta
              + model.expression_basis @ params.psi).reshape(-1, 3)
    R = axis_angle_to_matrix(params.rotation)
    return model.template.with_vertices(shaped @ R.T + params.translation)


def model_jacobian(model: MorphableModel, params: FaceParams) -> np.ndarray:
    """Analytic d vertices / d (beta, psi, rotation, translation), (3V, n_id+n_exp+6)."""
    if params.beta.shape != (model.n_id,) or params.psi.shape != (model.n_exp,):
        raise ParameterShapeError("parameter lengths do not match the model")
    V = model.template.n_vertices
    shaped = (model.mean
              + model.identity_basis @ params.beta
              + model.expression_basis @ params.psi).reshape(-1, 3)
    R = axis_angle_to_matrix(params.rotation)
    n_coef = model.n_id + model.n_exp
    J = np.zeros((3 * V, n_coef + 6))
    # basis columns rotate with the pose
    for j in range(model.n_id):
        J[:, j] = (model.identity_basis[:, j].reshape(-1, 3) @ R.T).reshape(-1)
    for j in range(model.n_exp):
        J[:, model.n_id + j] = (model.expression_basis[:, j].reshape(-1, 3) @ R.T).reshape(-1)
    J[:, n_coef:n_coef + 3] = rotation_jacobian(params.rotation, shaped).reshape(3 * V, 3)
    for a in range(3):
        J[a::3, n_coef + 3 + a] = 1.0
    return J


def crop_face_region(mesh: Mesh) -> Mesh:
    """Keep vertices within 0.7 * (outer eye dist + nose dist) of the face center.

    The face center is the midpoint of the two eye-center landmarks; the
    static interior-exclusion list is removed as well.  Faces touching a
    removed vertex are dropped and indices remapped; landmarks that survive
    keep their names, cropped-away ones disappear from the map.
    """
    for name in ("outer-left-eye", "outer-right-eye", "left-eye-center",
                 "right-eye-center", "nose-tip"):
        if name not in mesh.landmark_indices:
            raise ShapeLossError(f"crop_face_region needs landmark {name!r}")
    lm = mesh.landmark_indices
    v = mesh.vertices
    center = (v[lm["left-eye-center"]] + v[lm["right-eye-center"]]) / 2.0
    eye_dist = np.linalg.norm(v[lm["outer-left-eye"]] - v[lm["outer-right-eye"]])
    nose_dist = np.linalg.norm(center - v[lm["nose-tip"]])
    radius = CROP_FACTOR * (eye_dist + nose_dist)
    keep = np.linalg.norm(v - center, axis=1) <= radius
    if len(mesh.excluded_vertices):
        keep[mesh.excluded_vertices] = False
    if not keep.any():
        raise EmptyRegionError("cropping removed every vertex")
    new_index = -np.ones(len(v), dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    faces_kept = mesh.faces[np.all(keep[mesh.faces], axis=1)]
    new_landmarks = {name: int(new_index[i]) for name, i in lm.items() if keep[i]}
    return Mesh(v[keep], new_index[faces_kept].astype(np.int32), new_landmarks)


def _pca(data: np.ndarray, n_components: int, what: str):
    """Thin-SVD PCA of row observations; returns (basis (D,n), stddevs (n,)).

    Components are ordered by singular value (ties keep first occurrence) and
    sign-fixed so the largest-magnitude entry of each is positive.
    """
    n_samples = data.shape[0]
    if n_components > min(n_samples, data.shape[1]):
        raise RankError(f"{what}: {n_samples} samples cannot support "
                        f"{n_components} components")
    _, s, vt = np.linalg.svd(data, full_matrices=False)
    basis = vt[:n_components].T.copy()
    for j in range(basis.shape[1]):
        k = int(np.argmax(np.abs(basis[:, j])))
        if basis[k, j] < 0:
            basis[:, j] = -basis[:, j]
    stddevs = s[:n_components] / np.sqrt(max(n_samples - 1, 1))
    return basis, stddevs


@dataclass(frozen=True)
class RegisteredScan:
    """One registered corpus mesh; expression_id 0 means the neutral face."""

    subject_id: int
    expression_id: int
    mesh: Mesh


def build_pca_model(corpus, n_id: int, n_exp: int) -> MorphableModel:
    """PCA model from a registered scan corpus.

    The identity basis comes from the per-subject neutral scans
    (expression_id 0), the expression basis from (expression - same-subject
    neutral) vertex deltas about zero, so psi = 0 reproduces the neutral face.
    """
    corpus = list(corpus)
    neutrals = {s.subject_id: s.mesh for s in corpus if s.expression_id == 0}
    neutral_meshes = [neutrals[k] for k in sorted(neutrals)]
    expression_deltas = []
    for scan in corpus:
        if scan.expression_id == 0:
            continue
        if scan.subject_id not in neutrals:
            raise RankError(f"subject {scan.subject_id} has expressions but no neutral scan")
        expression_deltas.append((scan.mesh, neutrals[scan.subject_id]))
    if not neutral_meshes:
        raise RankError("empty neutral corpus")
    ref = neutral_meshes[0]
    ref_hash = ref.topology_hash()
    flats = []
    for m in neutral_meshes:
        if m.topology_hash() != ref_hash:
            raise TopologyError("neutral meshes disagree on topology")
        flats.append(m.vertices.reshape(-1))
    X = np.stack(flats)
    mean = X.mean(axis=0)
    id_basis, id_std = _pca(X - mean, n_id, "identity basis")

    deltas = []
    for expr_mesh, neutral_mesh in expression_deltas:
        if expr_mesh.topology_hash() != ref_hash or neutral_mesh.topology_hash() != ref_hash:
            raise TopologyError("expression pair disagrees with corpus topology")
        deltas.append((expr_mesh.vertices - neutral_mesh.vertices).reshape(-1))
    if len(deltas) < n_exp:
        raise RankError(f"{len(deltas)} expression pairs cannot support {n_exp} components")
    D = np.stack(deltas)
    exp_basis, exp_std = _pca(D, n_exp, "expression basis")

    return MorphableModel(
        template=ref, mean=mean,
        identity_basis=id_basis, expression_basis=exp_basis,
        identity_stddevs=id_std, expression_stddevs=exp_std,
    )


# ---------------------------------------------------------------------------
# persistence

def save_model(path, model: MorphableModel) -> None:
    save_container(path, {
        "mean": model.mean,
        "identity_basis": model.identity_basis,
        "expression_basis": model.expression_basis,
        "identity_stddevs": model.identity_stddevs,
        "expression_stddevs": model.expression_stddevs,
        "template_vertices": model.template.vertices,
        "template_faces": model.template.faces,
        "excluded_vertices": model.template.excluded_vertices,
    }, meta={
        "kind": "morphable_model",
        "n_id": model.n_id,
        "n_exp": model.n_exp,
        "topology_hash": model.template.topology_hash(),
        "landmarks": {k: int(v) for k, v in model.template.landmark_indices.items()},
    })


def load_model(path) -> MorphableModel:
    arrays, meta = load_container(path)
    if meta.get("kind") != "morphable_model":
        raise ShapeLossError(f"{path} is not a morphable model container")
    template = Mesh(
        np.array(arrays["template_vertices"]),
        np.array(arrays["template_faces"]),
        {k: int(v) for k, v in meta["landmarks"].items()},
        np.array(arrays["excluded_vertices"]),
    )
    model = MorphableModel(
        template=template,
        mean=np.array(arrays["mean"]),
        identity_basis=np.array(arrays["identity_basis"]),
        expression_basis=np.array(arrays["expression_basis"]),
        identity_stddevs=np.array(arrays["identity_stddevs"]),
        expression_stddevs=np.array(arrays["expression_stddevs"]),
    )
    if template.topology_hash() != meta["topology_hash"]:
        raise ShapeLossError("model container topology hash mismatch")
    return model


def save_obj(path, mesh: Mesh) -> None:
    """Wavefront OBJ (triangles only) + landmark sidecar JSON."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for a, b, c in mesh.faces:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    Path(path).write_text("\n".join(lines) + "\n")
    sidecar = Path(path).with_suffix(".landmarks.json")
    sidecar.write_text(json.dumps(
        {k: int(v) for k, v in sorted(mesh.landmark_indices.items())}, indent=2) + "\n")


def load_obj(path) -> Mesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            if len(idx) != 3:
                raise ShapeLossError("only triangular faces are supported")
            faces.append(idx)
    landmarks = {}
    sidecar = Path(path).with_suffix(".landmarks.json")
    if sidecar.exists():
        landmarks = {k: int(v) for k, v in json.loads(sidecar.read_text()).items()}
    return Mesh(np.array(verts), np.array(faces, dtype=np.int32).reshape(-1, 3), landmarks)


def write_error_ply(path, mesh: Mesh, per_vertex_error: np.ndarray) -> None:
    """ASCII PLY with a per-vertex scalar 'quality' channel (error map)."""
    err = np.asarray(per_vertex_error, dtype=np.float64)
    if err.shape != (mesh.n_vertices,):
        raise ShapeLossError("per-vertex error length mismatch")
    out = [
        "ply", "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property float x", "property float y", "property float z",
        "property float quality",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for (x, y, z), e in zip(mesh.vertices, err):
        out.append(f"{x:.9g} {y:.9g} {z:.9g} {e:.9g}")
    for a, b, c in mesh.faces:
        out.append(f"3 {a} {b} {c}")
    Path(path).write_text("\n".join(out) + "\n")
