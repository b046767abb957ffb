import struct

import numpy as np
import pytest

from second.errors import BadMagic, ShapeOverflow, TruncatedPayload, VersionUnsupported
from second.secd import DTYPE_F32, MAGIC, VERSION, read_tensor, write_tensor


def header(magic=MAGIC, version=VERSION, dtype=DTYPE_F32, dims=()):
    blob = struct.pack("<4sHBB", magic, version, dtype, len(dims))
    return blob + struct.pack(f"<{len(dims)}I", *dims)


class TestRoundTrip:
    def test_random_tensor_bit_exact(self, tmp_path):
        rng = np.random.default_rng(41)
        path = tmp_path / "t.secd"
        for _ in range(20):
            ndim = int(rng.integers(0, 4))
            shape = tuple(int(rng.integers(1, 6)) for _ in range(ndim))
            tensor = rng.standard_normal(shape).astype(np.float32)
            write_tensor(path, tensor)
            back = read_tensor(path)
            assert back.shape == tensor.shape
            assert back.tobytes() == tensor.tobytes()

    def test_extreme_f32_values_survive(self, tmp_path):
        tensor = np.array([np.finfo(np.float32).max, np.finfo(np.float32).tiny,
                           -0.0, 1e-45], dtype=np.float32)
        path = tmp_path / "edge.secd"
        write_tensor(path, tensor)
        assert read_tensor(path).tobytes() == tensor.tobytes()


class TestMalformedFiles:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.secd"
        path.write_bytes(header(magic=b"XXXX", dims=(1,)) + b"\x00" * 4)
        with pytest.raises(BadMagic):
            read_tensor(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.secd"
        path.write_bytes(header(version=9, dims=(1,)) + b"\x00" * 4)
        with pytest.raises(VersionUnsupported):
            read_tensor(path)

    def test_unsupported_dtype(self, tmp_path):
        path = tmp_path / "f64.secd"
        path.write_bytes(header(dtype=2, dims=(1,)) + b"\x00" * 8)
        with pytest.raises(VersionUnsupported):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        # dims declare 2x3 = 6 floats but only 5 are present
        path = tmp_path / "short.secd"
        path.write_bytes(header(dims=(2, 3)) + b"\x00" * 20)
        with pytest.raises(TruncatedPayload):
            read_tensor(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "long.secd"
        path.write_bytes(header(dims=(2,)) + b"\x00" * 12)
        with pytest.raises(TruncatedPayload):
            read_tensor(path)

    def test_header_shorter_than_dims(self, tmp_path):
        path = tmp_path / "dims.secd"
        path.write_bytes(header(dims=(2, 3))[:-2])
        with pytest.raises(TruncatedPayload):
            read_tensor(path)

    def test_shape_overflow(self, tmp_path):
        path = tmp_path / "huge.secd"
        path.write_bytes(header(dims=(1 << 20, 1 << 20)) + b"\x00" * 4)
        with pytest.raises(ShapeOverflow):
            read_tensor(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.secd"
        path.write_bytes(b"")
        with pytest.raises(TruncatedPayload):
            read_tensor(path)


class TestWriter:
    def test_converts_float64(self, tmp_path):
        path = tmp_path / "f64in.secd"
        write_tensor(path, np.array([0.1, 0.2]))
        assert read_tensor(path).dtype == np.float32

    def test_layout_matches_spec(self, tmp_path):
        path = tmp_path / "layout.secd"
        write_tensor(path, np.array([[1.0, 2.0]], dtype=np.float32))
        blob = path.read_bytes()
        assert blob[:4] == b"SECD"
        assert struct.unpack_from("<H", blob, 4)[0] == 1    # version
        assert blob[6] == 1                                 # dtype f32
        assert blob[7] == 2                                 # ndim
        assert struct.unpack_from("<2I", blob, 8) == (1, 2)
        assert np.frombuffer(blob[16:], dtype="<f4").tolist() == [1.0, 2.0]
