import numpy as np
import pytest

from shapeloss.container import ContainerError, load_container, save_container


def test_roundtrip_arrays_and_meta(tmp_path):
    arrays = {
        "floats": np.arange(12.0).reshape(3, 4),
        "ints": np.array([[1, 2], [3, 4]], dtype=np.int32),
        "bytes": np.frombuffer(b"abcd", dtype=np.uint8),
    }
    meta = {"n_id": 30, "n_exp": 20, "topology_hash": "deadbeef"}
    path = tmp_path / "model.slc"
    save_container(path, arrays, meta)
    loaded, meta2 = load_container(path)
    assert meta2 == meta
    for k, v in arrays.items():
        np.testing.assert_array_equal(loaded[k], v)
        assert loaded[k].dtype == v.dtype


def test_deterministic_bytes(tmp_path):
    arrays = {"a": np.linspace(0, 1, 7), "b": np.eye(3)}
    p1, p2 = tmp_path / "one.slc", tmp_path / "two.slc"
    save_container(p1, arrays, {"seed": 7})
    save_container(p2, arrays, {"seed": 7})
    assert p1.read_bytes() == p2.read_bytes()


def test_mmap_load(tmp_path):
    path = tmp_path / "big.slc"
    data = np.arange(1000, dtype=np.float32).reshape(10, 100)
    save_container(path, {"data": data}, {})
    arrays, _ = load_container(path, mmap=True)
    assert isinstance(arrays["data"], np.memmap)
    np.testing.assert_array_equal(np.asarray(arrays["data"]), data)


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.slc"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 100)
    with pytest.raises(ContainerError):
        load_container(path)
