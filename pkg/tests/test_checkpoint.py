import numpy as np
import pytest
import torch

from gesturegen.checkpoint import load_checkpoint, save_checkpoint
from gesturegen.config import TrainConfig
from gesturegen.errors import CheckpointError, ShapeError
from gesturegen.training import init_train_state, train_epoch

from test_training import tiny_corpus


def trained_state(cfg=None, steps=True):
    cfg = cfg or TrainConfig(batch=4)
    utts, norm = tiny_corpus(cfg, n_utts=1, frames=60)
    state = init_train_state(cfg, norm, skeleton_bvh="HIERARCHY\nfake\n")
    if steps:
        train_epoch(state, utts, cfg)
    return state


def assert_states_equal(a, b):
    for (name_a, pa), (name_b, pb) in zip(
        a.generator.named_parameters(), b.generator.named_parameters()
    ):
        assert name_a == name_b
        assert torch.equal(pa, pb), name_a
    for (name_a, pa), (name_b, pb) in zip(
        a.discriminator.named_parameters(), b.discriminator.named_parameters()
    ):
        assert name_a == name_b
        assert torch.equal(pa, pb), name_a
    for attr in ("feat_mean", "feat_std", "pose_mean", "pose_std"):
        np.testing.assert_array_equal(getattr(a.norm, attr), getattr(b.norm, attr))
    for opt_a, opt_b in ((a.opt_g, b.opt_g), (a.opt_d, b.opt_d)):
        sa, sb = opt_a.state_dict()["state"], opt_b.state_dict()["state"]
        assert sa.keys() == sb.keys()
        for key in sa:
            assert torch.equal(sa[key]["step"], sb[key]["step"])
            assert torch.equal(sa[key]["exp_avg"], sb[key]["exp_avg"])
            assert torch.equal(sa[key]["exp_avg_sq"], sb[key]["exp_avg_sq"])
    assert a.cfg == b.cfg
    assert a.epoch == b.epoch
    assert a.best_val == b.best_val
    assert a.skeleton_bvh == b.skeleton_bvh


class TestRoundTrip:
    def test_bit_exact_including_optimizer(self, tmp_path):
        state = trained_state()
        path = tmp_path / "model.ggck"
        save_checkpoint(state, path)
        loaded = load_checkpoint(path)
        assert_states_equal(state, loaded)

    def test_fresh_state_without_optimizer_moments(self, tmp_path):
        state = trained_state(steps=False)
        path = tmp_path / "fresh.ggck"
        save_checkpoint(state, path)
        loaded = load_checkpoint(path)
        assert_states_equal(state, loaded)

    def test_double_round_trip_stable(self, tmp_path):
        state = trained_state()
        p1, p2 = tmp_path / "a.ggck", tmp_path / "b.ggck"
        save_checkpoint(state, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestErrors:
    def test_truncated_file(self, tmp_path):
        state = trained_state(steps=False)
        path = tmp_path / "model.ggck"
        save_checkpoint(state, path)
        path.write_bytes(path.read_bytes()[:200])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ggck"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        state = trained_state(steps=False)
        path = tmp_path / "model.ggck"
        save_checkpoint(state, path)
        data = bytearray(path.read_bytes())
        data[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.ggck")

    def test_mismatched_ablation_flags_name_tensor(self, tmp_path):
        ablated = TrainConfig(batch=4, no_text=True)
        state = trained_state(ablated, steps=False)
        path = tmp_path / "ablated.ggck"
        save_checkpoint(state, path)
        with pytest.raises(ShapeError, match="gen.gru.weight_ih_l0"):
            load_checkpoint(path, cfg=TrainConfig(batch=4))
