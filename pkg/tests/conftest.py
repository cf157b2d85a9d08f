import numpy as np
import pytest

from shapeloss import geometry, toyface
from shapeloss.camera import look_at


@pytest.fixture(scope="session")
def template():
    return toyface.make_template(resolution=24)


@pytest.fixture(scope="session")
def small_model(template):
    scans = toyface.make_scan_corpus(template, n_subjects=8, n_expressions=4, seed=11)
    return geometry.build_pca_model(scans, n_id=5, n_exp=4)


@pytest.fixture(scope="session")
def front_camera():
    return look_at(eye=(0.0, 0.0, 0.6), image_size=(128, 128), focal_length=256.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
