import numpy as np
import pytest

from shapeloss import geometry, toyface
from shapeloss.errors import (EmptyRegionError, ParameterShapeError, RankError,
                              TopologyError)
from shapeloss.geometry import (FaceParams, Mesh, RegisteredScan,
                                build_pca_model, crop_face_region,
                                evaluate_model, model_jacobian)
from shapeloss.mathutil import axis_angle_to_matrix


def test_zero_params_reproduce_mean(small_model):
    mesh = evaluate_model(small_model, FaceParams.zeros(small_model))
    np.testing.assert_array_equal(mesh.vertices.reshape(-1), small_model.mean)


def test_rotation_pi_about_z(small_model):
    params = FaceParams(np.zeros(small_model.n_id), np.zeros(small_model.n_exp),
                        rotation=np.array([0.0, 0.0, np.pi]))
    mesh = evaluate_model(small_model, params)
    mu = small_model.mean.reshape(-1, 3)
    expect = np.stack([-mu[:, 0], -mu[:, 1], mu[:, 2]], axis=1)
    np.testing.assert_allclose(mesh.vertices, expect, atol=1e-6)


def test_first_basis_column_oracle(small_model):
    beta = np.zeros(small_model.n_id)
    beta[0] = 1.0
    mesh = evaluate_model(small_model, FaceParams(beta, np.zeros(small_model.n_exp)))
    # independent dense matvec
    expect = small_model.mean + small_model.identity_basis @ beta
    np.testing.assert_allclose(mesh.vertices.reshape(-1), expect, rtol=0, atol=1e-12)


def test_parameter_shape_error(small_model):
    with pytest.raises(ParameterShapeError):
        evaluate_model(small_model, FaceParams(np.zeros(small_model.n_id + 1),
                                               np.zeros(small_model.n_exp)))


def test_linearity_in_coefficients(small_model, rng):
    b1 = rng.normal(size=small_model.n_id)
    b2 = rng.normal(size=small_model.n_id)
    psi = rng.normal(size=small_model.n_exp)
    a, b = 0.7, -1.3
    m_comb = evaluate_model(small_model, FaceParams(a * b1 + b * b2, psi))
    v1 = evaluate_model(small_model, FaceParams(b1, psi)).vertices
    v2 = evaluate_model(small_model, FaceParams(b2, psi)).vertices
    v0 = evaluate_model(small_model, FaceParams(np.zeros(small_model.n_id), psi)).vertices
    np.testing.assert_allclose(m_comb.vertices, a * v1 + b * v2 + (1 - a - b) * v0, atol=1e-9)


def test_jacobian_matches_finite_differences(small_model, rng):
    params = FaceParams(0.1 * rng.normal(size=small_model.n_id),
                        0.1 * rng.normal(size=small_model.n_exp),
                        rotation=np.array([0.2, -0.1, 0.3]),
                        translation=np.array([0.01, -0.02, 0.005]))
    J = model_jacobian(small_model, params)
    h = 1e-6
    vec = np.concatenate([params.beta, params.psi, params.rotation, params.translation])

    def eval_at(v):
        p = FaceParams(v[:small_model.n_id],
                       v[small_model.n_id:small_model.n_id + small_model.n_exp],
                       v[-6:-3], v[-3:])
        return evaluate_model(small_model, p).vertices.reshape(-1)

    for j in range(len(vec)):
        vp, vm = vec.copy(), vec.copy()
        vp[j] += h
        vm[j] -= h
        fd = (eval_at(vp) - eval_at(vm)) / (2 * h)
        denom = max(np.abs(fd).max(), 1e-8)
        assert np.abs(J[:, j] - fd).max() / denom < 1e-4, f"column {j}"


def test_crop_all_center_retained():
    template = toyface.make_template(16)
    lm = template.landmark_indices
    v = template.vertices.copy()
    center = (v[lm["left-eye-center"]] + v[lm["right-eye-center"]]) / 2.0
    # collapse everything onto the face center except the landmarks themselves
    collapsed = np.tile(center, (len(v), 1))
    for name in ("outer-left-eye", "outer-right-eye", "left-eye-center",
                 "right-eye-center", "nose-tip"):
        collapsed[lm[name]] = v[lm[name]]
    mesh = Mesh(collapsed, template.faces, template.landmark_indices)
    cropped = crop_face_region(mesh)
    assert cropped.n_vertices == mesh.n_vertices


def test_crop_threshold_boundary(template):
    lm = template.landmark_indices
    v = template.vertices.copy()
    center = (v[lm["left-eye-center"]] + v[lm["right-eye-center"]]) / 2.0
    eye = np.linalg.norm(v[lm["outer-left-eye"]] - v[lm["outer-right-eye"]])
    nose = np.linalg.norm(center - v[lm["nose-tip"]])
    radius = 0.7 * (eye + nose)
    # push one currently-retained non-landmark vertex just beyond the threshold
    taken = set(lm.values()) | set(template.excluded_vertices.tolist())
    kept = np.linalg.norm(v - center, axis=1) <= radius
    victim = next(i for i in range(len(v)) if i not in taken and kept[i])
    direction = np.array([0.0, 0.0, 1.0])
    v[victim] = center + 0.71 * radius / 0.7 * direction
    mesh = Mesh(v, template.faces, lm, template.excluded_vertices)
    cropped = crop_face_region(mesh)
    base = crop_face_region(template)
    assert cropped.n_vertices == base.n_vertices - 1


def test_crop_matches_bruteforce(small_model, rng):
    params = FaceParams(rng.normal(size=small_model.n_id) * small_model.identity_stddevs,
                        rng.normal(size=small_model.n_exp) * small_model.expression_stddevs)
    mesh = evaluate_model(small_model, params)
    cropped = crop_face_region(mesh)
    lm = mesh.landmark_indices
    v = mesh.vertices
    center = (v[lm["left-eye-center"]] + v[lm["right-eye-center"]]) / 2.0
    eye = np.linalg.norm(v[lm["outer-left-eye"]] - v[lm["outer-right-eye"]])
    nose = np.linalg.norm(center - v[lm["nose-tip"]])
    keep = np.linalg.norm(v - center, axis=1) <= 0.7 * (eye + nose)
    keep[mesh.excluded_vertices] = False
    np.testing.assert_array_equal(cropped.vertices, v[keep])


def test_crop_idempotent(template):
    once = crop_face_region(template)
    twice = crop_face_region(once)
    assert once.n_vertices == twice.n_vertices
    np.testing.assert_array_equal(once.vertices, twice.vertices)
    np.testing.assert_array_equal(once.faces, twice.faces)


def test_crop_rigid_invariance(template, rng):
    R = axis_angle_to_matrix(rng.normal(size=3))
    t = rng.normal(size=3) * 0.3
    moved = Mesh(template.vertices @ R.T + t, template.faces,
                 template.landmark_indices, template.excluded_vertices)
    keep_a = {tuple(v) for v in crop_face_region(template).faces.tolist()}
    keep_b = {tuple(v) for v in crop_face_region(moved).faces.tolist()}
    assert keep_a == keep_b


def test_crop_empty_region_error(template):
    # eye-center landmarks always sit inside the distance threshold, so an
    # empty region can only come from the static exclusion list
    mesh = Mesh(template.vertices, template.faces, template.landmark_indices,
                np.arange(template.n_vertices))
    with pytest.raises(EmptyRegionError):
        crop_face_region(mesh)


def test_pca_identical_corpus(template):
    scans = [RegisteredScan(i, 0, template) for i in range(4)]
    scans += [RegisteredScan(i, 1, template) for i in range(4)]
    model = build_pca_model(scans, n_id=2, n_exp=1)
    np.testing.assert_allclose(model.mean, template.vertices.reshape(-1))
    assert np.all(model.identity_stddevs < 1e-9)
    assert np.all(model.expression_stddevs < 1e-9)


def test_pca_two_point(template, rng):
    delta = rng.normal(size=template.vertices.shape) * 0.01
    m1, m2 = template, template.with_vertices(template.vertices + delta)
    model = build_pca_model([RegisteredScan(0, 0, m1), RegisteredScan(1, 0, m2),
                             RegisteredScan(0, 1, m1)], n_id=1, n_exp=1)
    col = model.identity_basis[:, 0]
    diff = delta.reshape(-1)
    cosang = abs(col @ diff) / np.linalg.norm(diff)
    assert abs(np.linalg.norm(col) - 1.0) < 1e-9
    assert abs(cosang - 1.0) < 1e-9


def test_pca_full_rank_roundtrip(template):
    scans = toyface.make_scan_corpus(template, n_subjects=10, n_expressions=3, seed=3)
    n_id = 9   # 10 neutrals -> rank 9 after centering
    n_exp = 10
    model = build_pca_model(scans, n_id=n_id, n_exp=n_exp)
    # orthonormality
    for B in (model.identity_basis, model.expression_basis):
        gram = B.T @ B
        np.testing.assert_allclose(gram, np.eye(B.shape[1]), atol=1e-5)
    neutrals = [s.mesh for s in scans if s.expression_id == 0]
    for mesh in neutrals:
        flat = mesh.vertices.reshape(-1)
        coeff = model.identity_basis.T @ (flat - model.mean)
        recon = model.mean + model.identity_basis @ coeff
        rmse = np.sqrt(np.mean((recon - flat) ** 2))
        assert rmse < 1e-6


def test_pca_topology_error(template):
    other = toyface.make_template(16)
    with pytest.raises(TopologyError):
        build_pca_model([RegisteredScan(0, 0, template), RegisteredScan(1, 0, other)],
                        n_id=1, n_exp=0)


def test_pca_rank_error(template):
    scans = [RegisteredScan(0, 0, template), RegisteredScan(1, 0, template)]
    with pytest.raises(RankError):
        build_pca_model(scans, n_id=5, n_exp=0)


def test_model_container_roundtrip(tmp_path, small_model):
    path = tmp_path / "model.slc"
    geometry.save_model(path, small_model)
    loaded = geometry.load_model(path)
    np.testing.assert_array_equal(loaded.mean, small_model.mean)
    np.testing.assert_array_equal(loaded.identity_basis, small_model.identity_basis)
    assert loaded.template.landmark_indices == small_model.template.landmark_indices
    assert loaded.template.topology_hash() == small_model.template.topology_hash()


def test_obj_roundtrip(tmp_path, template):
    path = tmp_path / "face.obj"
    geometry.save_obj(path, template)
    loaded = geometry.load_obj(path)
    np.testing.assert_allclose(loaded.vertices, template.vertices, atol=1e-7)
    np.testing.assert_array_equal(loaded.faces, template.faces)
    assert loaded.landmark_indices == template.landmark_indices
