import struct

import numpy as np
import pytest

from ufnd.checkpoint import (FORMAT_VERSION, MAGIC, Checkpoint,
                             load_checkpoint, save_checkpoint)
from ufnd.errors import IntegrityError, VersionError


def sample_checkpoint():
    rng = np.random.default_rng(0)
    return Checkpoint(
        config={"d_model": 16, "blocks": [1, 2]},
        tensors={
            "model/w": rng.standard_normal((3, 4)).astype(np.float32),
            "model/b": np.zeros(3, dtype=np.float32),
            "adam/w/m": rng.standard_normal((3, 4)),
            "meta/ids": np.arange(5, dtype=np.int64),
        },
        meta={"epoch": 7, "best_val_accuracy": 0.91})


class TestRoundTrip:
    def test_exact_roundtrip(self, tmp_path):
        ckpt = sample_checkpoint()
        path = tmp_path / "c.ufnd"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)
        assert loaded.config == ckpt.config
        assert loaded.meta == ckpt.meta
        assert sorted(loaded.tensors) == sorted(ckpt.tensors)
        for name, arr in ckpt.tensors.items():
            np.testing.assert_array_equal(loaded.tensors[name], arr)
            assert loaded.tensors[name].dtype == arr.dtype

    def test_bitwise_deterministic(self, tmp_path):
        ckpt = sample_checkpoint()
        a, b = tmp_path / "a.ufnd", tmp_path / "b.ufnd"
        save_checkpoint(ckpt, a)
        save_checkpoint(ckpt, b)
        assert a.read_bytes() == b.read_bytes()

    def test_meta_properties(self, tmp_path):
        path = tmp_path / "c.ufnd"
        save_checkpoint(sample_checkpoint(), path)
        loaded = load_checkpoint(path)
        assert loaded.epoch == 7
        assert loaded.best_val_accuracy == 0.91

    def test_empty_tensor_dict(self, tmp_path):
        path = tmp_path / "c.ufnd"
        save_checkpoint(Checkpoint(config={}, tensors={}, meta={}), path)
        assert load_checkpoint(path).tensors == {}


class TestFormatLayout:
    def test_magic_and_version_bytes(self, tmp_path):
        path = tmp_path / "c.ufnd"
        save_checkpoint(sample_checkpoint(), path)
        blob = path.read_bytes()
        assert blob[:4] == MAGIC == b"UFND"
        version, header_len = struct.unpack("<II", blob[4:12])
        assert version == FORMAT_VERSION == 1
        assert blob[12:12 + header_len].startswith(b"{")

    def test_payload_is_little_endian_raw(self, tmp_path):
        path = tmp_path / "c.ufnd"
        arr = np.array([1.0, 2.0], dtype=">f8")  # big-endian input
        save_checkpoint(Checkpoint(config={}, tensors={"x": arr}), path)
        loaded = load_checkpoint(path).tensors["x"]
        np.testing.assert_array_equal(loaded, [1.0, 2.0])
        assert loaded.dtype.byteorder in ("<", "=")


class TestCorruption:
    def _saved(self, tmp_path):
        path = tmp_path / "c.ufnd"
        save_checkpoint(sample_checkpoint(), path)
        return path

    def test_bad_magic(self, tmp_path):
        path = self._saved(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[0] = ord("X")
        path.write_bytes(bytes(blob))
        with pytest.raises(IntegrityError, match="magic"):
            load_checkpoint(path)

    def test_payload_bit_flip_detected(self, tmp_path):
        path = self._saved(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[-10] ^= 0x01  # inside the payload, before the CRC
        path.write_bytes(bytes(blob))
        with pytest.raises(IntegrityError, match="checksum"):
            load_checkpoint(path)

    def test_truncation_detected(self, tmp_path):
        path = self._saved(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(IntegrityError):
            load_checkpoint(path)

    def test_tiny_file(self, tmp_path):
        path = tmp_path / "c.ufnd"
        path.write_bytes(b"UF")
        with pytest.raises(IntegrityError):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        path = self._saved(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionError):
            load_checkpoint(path)

    def test_garbage_header(self, tmp_path):
        path = tmp_path / "c.ufnd"
        header = b"\xff\xfe\xfd"
        path.write_bytes(MAGIC + struct.pack("<II", 1, len(header))
                         + header + struct.pack("<I", 0))
        with pytest.raises(IntegrityError):
            load_checkpoint(path)
