import json
import struct

import numpy as np
import pytest

from polyscore.errors import CheckpointVersionError, CorruptCheckpointError
from polyscore.scoring import ScoringModel, load, save
from polyscore.scoring.checkpoint import MAGIC, read_header


@pytest.fixture
def model():
    m = ScoringModel(7, ("en", "ta"), hidden=5, seed=4, layout={"gop": (0, 1), "tempo": (1, 6)},
                     feature_meta={"k": 1, "dim": 0})
    m.fit_normalizer([np.random.default_rng(0).standard_normal((20, 7))])
    return m


def _rewrite_header(path, **changes):
    data = path.read_bytes()
    (n,) = struct.unpack("<Q", data[16:24])
    header = json.loads(data[24 : 24 + n])
    header.update(changes)
    hb = json.dumps(header).encode()
    path.write_bytes(MAGIC + struct.pack("<Q", len(hb)) + hb + data[24 + n :])


class TestCheckpoint:
    def test_round_trip(self, model, tmp_path):
        save(model, tmp_path / "m.ckpt")
        back = load(tmp_path / "m.ckpt")
        assert back.params.tobytes() == model.params.tobytes()
        np.testing.assert_array_equal(back.input_mean, model.input_mean)
        np.testing.assert_array_equal(back.input_scale, model.input_scale)
        assert back.config() == model.config()
        X = np.random.default_rng(1).standard_normal((5, 7))
        for lang in ("en", "ta"):
            assert back.forward(X, lang).tobytes() == model.forward(X, lang).tobytes()

    def test_save_is_deterministic(self, model, tmp_path):
        save(model, tmp_path / "a.ckpt")
        save(model, tmp_path / "b.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_header(self, model, tmp_path):
        save(model, tmp_path / "m.ckpt")
        h = read_header(tmp_path / "m.ckpt")
        assert h["format_version"] == "1.0"
        assert h["n_params"] == model.n_params
        assert h["payload_bytes"] == 8 * (model.n_params + 2 * 7)
        assert h["languages"] == ["en", "ta"]

    def test_truncated(self, model, tmp_path):
        p = tmp_path / "m.ckpt"
        save(model, p)
        p.write_bytes(p.read_bytes()[:-9])
        with pytest.raises(CorruptCheckpointError):
            load(p)
        p.write_bytes(p.read_bytes()[:30])
        with pytest.raises(CorruptCheckpointError):
            load(p)

    def test_flipped_byte(self, model, tmp_path):
        p = tmp_path / "m.ckpt"
        save(model, p)
        data = bytearray(p.read_bytes())
        data[-5] ^= 0xFF
        p.write_bytes(bytes(data))
        with pytest.raises(CorruptCheckpointError, match="checksum"):
            load(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "m.ckpt"
        p.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CorruptCheckpointError):
            load(p)

    def test_older_major_version(self, model, tmp_path):
        p = tmp_path / "m.ckpt"
        save(model, p)
        _rewrite_header(p, format_version="0.3")
        with pytest.raises(CheckpointVersionError, match="0.3"):
            load(p)

    def test_newer_minor_version_loads(self, model, tmp_path):
        p = tmp_path / "m.ckpt"
        save(model, p)
        _rewrite_header(p, format_version="1.7")
        assert load(p).params.tobytes() == model.params.tobytes()

    def test_manifest_mismatch(self, model, tmp_path):
        p = tmp_path / "m.ckpt"
        save(model, p)
        _rewrite_header(p, topology={"input_dim": 7, "hidden": 6, "layers": 2})
        with pytest.raises(CorruptCheckpointError):
            load(p)
