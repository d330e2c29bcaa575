"""Container format: exact round trips, integrity checks, corruption handling."""
import hashlib

import numpy as np
import pytest

from aligngan import checkpoint as ckpt
from aligngan.checkpoint import CheckpointError, MAGIC, dump, load, loads, save
from aligngan.networks import (build_discriminator, build_generator,
                               mlp_discriminator_spec, mlp_generator_spec)


def _nets():
    gen = build_generator(mlp_generator_spec(hidden=(8, 8)), seed=0)
    disc = build_discriminator(mlp_discriminator_spec(hidden=(8, 8)), seed=1)
    return gen, disc


class TestRoundTrip:
    def test_bit_exact_parameters(self):
        gen, disc = _nets()
        gen2, disc2, meta = loads(dump(gen, disc, meta={"step": 42}))
        for k, v in gen.parameters().items():
            np.testing.assert_array_equal(gen2.parameters()[k], v)
        for k, v in disc.parameters().items():
            np.testing.assert_array_equal(disc2.parameters()[k], v)
        assert meta == {"step": 42}

    def test_spec_preserved(self):
        gen, disc = _nets()
        gen2, disc2, _ = loads(dump(gen, disc))
        assert gen2.spec == gen.spec
        assert disc2.spec == disc.spec

    def test_generator_only_container(self):
        gen, _ = _nets()
        gen2, disc2, _ = loads(dump(gen))
        assert disc2 is None
        for k, v in gen.parameters().items():
            np.testing.assert_array_equal(gen2.parameters()[k], v)

    def test_dump_is_deterministic(self):
        gen, disc = _nets()
        assert dump(gen, disc, meta={"a": 1}) == dump(gen, disc, meta={"a": 1})

    def test_file_round_trip(self, tmp_path):
        gen, disc = _nets()
        path = tmp_path / "model.agck"
        save(path, gen, disc, meta={"step": 7})
        gen2, _, meta = load(path)
        assert meta["step"] == 7
        for k, v in gen.parameters().items():
            np.testing.assert_array_equal(gen2.parameters()[k], v)


class TestIntegrity:
    def test_magic_prefix(self):
        gen, disc = _nets()
        assert dump(gen, disc).startswith(MAGIC)

    def test_bad_magic_rejected(self):
        gen, disc = _nets()
        raw = b"XXXXX" + dump(gen, disc)[5:]
        with pytest.raises(CheckpointError, match="magic"):
            loads(raw)

    def test_header_tamper_detected(self):
        gen, disc = _nets()
        raw = bytearray(dump(gen, disc, meta={"step": 1}))
        # flip one byte inside the json header (after magic+digest+len)
        raw[len(MAGIC) + 32 + 4 + 3] ^= 0xFF
        with pytest.raises(CheckpointError, match="digest"):
            loads(bytes(raw))

    def test_truncation_detected(self):
        gen, disc = _nets()
        raw = dump(gen, disc)
        with pytest.raises(CheckpointError, match="truncated"):
            loads(raw[:-4])

    def test_trailing_bytes_detected(self):
        gen, disc = _nets()
        with pytest.raises(CheckpointError, match="trailing"):
            loads(dump(gen, disc) + b"\x00")

    def test_header_digest_is_sha256(self):
        gen, disc = _nets()
        raw = dump(gen, disc)
        hlen = int.from_bytes(raw[len(MAGIC) + 32:len(MAGIC) + 36], "little")
        header = raw[len(MAGIC) + 36:len(MAGIC) + 36 + hlen]
        assert raw[len(MAGIC):len(MAGIC) + 32] == hashlib.sha256(header).digest()
