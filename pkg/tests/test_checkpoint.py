"""Checkpoint container: round-trips, sidecars, and corruption handling."""

import json

import numpy as np
import pytest

from textad.checkpoint import AdamState, Checkpoint, load_checkpoint, save_checkpoint
from textad.config import RunConfig, load_config, save_config
from textad.errors import ConfigError, DataFormatError
from textad.model import AttentionParams


def make_checkpoint(rng, epoch=4) -> Checkpoint:
    params = AttentionParams(rng.normal(size=(3, 5)), rng.normal(size=(5, 2)))
    adam = AdamState(
        step=17,
        m_token=rng.normal(size=(3, 5)),
        v_token=rng.random(size=(3, 5)),
        m_head=rng.normal(size=(5, 2)),
        v_head=rng.random(size=(5, 2)),
    )
    gen = np.random.Generator(np.random.PCG64(123))
    gen.normal(size=10)
    return Checkpoint(
        params=params,
        config=RunConfig(attention_width=5, head_count=2, seed=9),
        adam=adam,
        rng_state=gen.bit_generator.state,
        epoch=epoch,
        loss_history=[(1, 2.5), (2, 2.25), (3, 2.0), (4, 1.75)],
    )


class TestCheckpointRoundTrip:
    def test_round_trip_preserves_everything(self, tmp_path, rng):
        ckpt = make_checkpoint(rng)
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)
        assert np.array_equal(loaded.params.token_proj, ckpt.params.token_proj)
        assert np.array_equal(loaded.params.head_proj, ckpt.params.head_proj)
        assert loaded.adam.step == 17
        assert np.array_equal(loaded.adam.m_token, ckpt.adam.m_token)
        assert np.array_equal(loaded.adam.v_head, ckpt.adam.v_head)
        assert loaded.rng_state == ckpt.rng_state
        assert loaded.epoch == 4
        assert loaded.loss_history == ckpt.loss_history
        assert loaded.config.to_json() == ckpt.config.to_json()

    def test_restored_rng_state_continues_stream(self, tmp_path, rng):
        ckpt = make_checkpoint(rng)
        gen = np.random.Generator(np.random.PCG64(123))
        gen.normal(size=10)
        expected_next = gen.normal(size=4)
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        restored = np.random.Generator(np.random.PCG64())
        restored.bit_generator.state = load_checkpoint(path).rng_state
        assert np.array_equal(restored.normal(size=4), expected_next)

    def test_sidecar_matches_config(self, tmp_path, rng):
        ckpt = make_checkpoint(rng)
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        sidecar = json.loads((tmp_path / "model.ckpt.json").read_text())
        assert sidecar == ckpt.config.to_dict()

    def test_identical_saves_are_byte_identical(self, tmp_path, rng):
        ckpt = make_checkpoint(rng)
        save_checkpoint(ckpt, tmp_path / "a.ckpt")
        save_checkpoint(ckpt, tmp_path / "b.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"WRONG!!!" + b"\x00" * 32)
        with pytest.raises(DataFormatError, match="magic"):
            load_checkpoint(path)

    def test_truncation_rejected(self, tmp_path, rng):
        path = tmp_path / "model.ckpt"
        save_checkpoint(make_checkpoint(rng), path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 20])
        with pytest.raises(DataFormatError):
            load_checkpoint(path)


class TestConfigFile:
    def test_save_load_round_trip(self, tmp_path):
        cfg = RunConfig(seed=5, epochs=12, loss_variant="focal", focal_gamma=1.5)
        path = tmp_path / "config.json"
        save_config(cfg, path)
        assert load_config(path).to_json() == cfg.to_json()

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"learning_rates": 0.1}))
        with pytest.raises(ConfigError, match="learning_rates"):
            load_config(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{nope")
        with pytest.raises(DataFormatError):
            load_config(path)

    def test_validation_catches_odd_batch(self):
        with pytest.raises(ConfigError, match="batch_size"):
            RunConfig(batch_size=7)

    def test_validation_catches_bad_variant(self):
        with pytest.raises(ConfigError):
            RunConfig(loss_variant="hinge")
        with pytest.raises(ConfigError):
            RunConfig(architecture_variant="bigger")

    def test_defaults_mirror_training_recipe(self):
        cfg = RunConfig()
        assert cfg.attention_width == 150
        assert cfg.head_count == 5
        assert cfg.batch_size == 16
        assert cfg.learning_rate == 1e-6
        assert cfg.k_fraction == 0.10
        assert cfg.margin == 5.0
        assert (cfg.prior.mean, cfg.prior.std, cfg.prior.sample_count) == (0.0, 1.0, 5000)
        assert cfg.loss_variant == "deviation"
        assert cfg.architecture_variant == "full"
