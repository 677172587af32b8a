import numpy as np
import pytest
import torch

from gesturegen.config import TrainConfig
from gesturegen.errors import ChunkSizeError, InvalidInputError
from gesturegen.models import (
    Discriminator,
    GenerationContext,
    Generator,
    ModelDims,
    Normalization,
    conv_output_lengths,
    discriminator_forward,
    generate_sequence,
    generator_step,
    init_params,
    sliding_windows,
)

from tinymodel import run_discriminator_gradcheck, run_generator_gradcheck

FULL = ModelDims()


def default_norm(dims=FULL):
    return Normalization(
        feat_mean=np.zeros(dims.feature_dim),
        feat_std=np.ones(dims.feature_dim),
        pose_mean=np.zeros(dims.pose_dim),
        pose_std=np.ones(dims.pose_dim),
    )


class TestShapes:
    def test_full_model_layer_sizes(self):
        gen, disc = init_params(0, FULL)
        assert FULL.input_dim == 814
        assert gen.gru.input_size == 814
        assert gen.gru.hidden_size == 128
        assert gen.gru.num_layers == 2
        assert gen.gru.bidirectional
        assert gen.fc1.in_features == 3840 and gen.fc1.out_features == 512
        assert gen.film_gamma.in_features == 135
        assert gen.film_beta.in_features == 135
        assert gen.fc2.in_features == 512 and gen.fc2.out_features == 256
        assert gen.out.in_features == 256 and gen.out.out_features == 45
        assert disc.text_stream[0].in_features == 768
        assert disc.audio_stream[0].in_features == 26
        assert disc.gesture_stream[0].in_features == 45
        assert disc.head[0].in_features == 1024

    def test_conv_temporal_chain(self):
        assert conv_output_lengths(40, FULL) == [38, 18, 16, 7, 5, 1]

    def test_conv_chain_observed_at_runtime(self):
        _, disc = init_params(0, FULL)
        lengths = []
        hooks = [
            conv.register_forward_hook(lambda m, i, o: lengths.append(o.shape[-1]))
            for conv in disc.convs
        ]
        disc(torch.zeros(1, 40, 45), torch.zeros(1, 40, 26), torch.zeros(1, 40, 768))
        for hook in hooks:
            hook.remove()
        assert lengths == [38, 18, 16, 7, 5, 1]
        assert disc.convs[-1].out_channels == 1024

    def test_incompatible_chunk_rejected_at_build(self):
        with pytest.raises(InvalidInputError):
            Discriminator(ModelDims(chunk=30))


class TestInitParams:
    def test_same_seed_bit_identical(self):
        g1, d1 = init_params(7, FULL)
        g2, d2 = init_params(7, FULL)
        for p1, p2 in zip(g1.parameters(), g2.parameters()):
            assert torch.equal(p1, p2)
        for p1, p2 in zip(d1.parameters(), d2.parameters()):
            assert torch.equal(p1, p2)

    def test_different_seeds_differ(self):
        g1, _ = init_params(7, FULL)
        g2, _ = init_params(8, FULL)
        assert any(
            not torch.equal(p1, p2) for p1, p2 in zip(g1.parameters(), g2.parameters())
        )

    def test_output_layer_shape(self):
        gen, _ = init_params(0, FULL)
        assert tuple(gen.out.weight.shape) == (45, 256)

    def test_bounds_and_zero_biases(self):
        gen, disc = init_params(3, FULL)
        for module in (gen, disc):
            for name, p in module.named_parameters():
                if p.ndim >= 2:
                    fan_in = int(np.prod(p.shape[1:]))
                    assert p.abs().max().item() <= (1.0 / fan_in) ** 0.5 + 1e-12, name
                elif name.endswith("bias"):
                    assert torch.equal(p, torch.zeros_like(p)), name
                else:  # layer norm scales
                    assert torch.equal(p, torch.ones_like(p)), name


class TestGeneratorForward:
    def test_output_width_and_range(self):
        gen, _ = init_params(0, FULL)
        gen.eval()
        out = gen(torch.randn(4, 15, 814), torch.randn(4, 135))
        assert out.shape == (4, 45)
        assert torch.all(out > -1) and torch.all(out < 1)

    def test_neutral_film_ignores_context(self):
        gen, _ = init_params(0, FULL)
        gen.eval()
        with torch.no_grad():
            gen.film_gamma.weight.zero_()  # gamma(c) == 1 (identity offset)
            gen.film_gamma.bias.zero_()
            gen.film_beta.weight.zero_()
            gen.film_beta.bias.zero_()     # beta(c) == 0
        win = torch.randn(2, 15, 814)
        a = gen(win, torch.randn(2, 135))
        b = gen(win, torch.randn(2, 135))
        assert torch.equal(a, b)

    def test_context_changes_output_by_default(self):
        gen, _ = init_params(0, FULL)
        gen.eval()
        win = torch.randn(1, 15, 814)
        a = gen(win, torch.full((1, 135), 0.5))
        b = gen(win, torch.full((1, 135), -0.5))
        assert not torch.equal(a, b)

    def test_shape_mismatch(self):
        gen, _ = init_params(0, FULL)
        with pytest.raises(InvalidInputError):
            gen(torch.randn(1, 14, 814), torch.randn(1, 135))
        with pytest.raises(InvalidInputError):
            gen(torch.randn(1, 15, 814), torch.randn(1, 134))


class TestDiscriminatorForward:
    def test_score_in_open_interval(self):
        _, disc = init_params(0, FULL)
        disc.eval()
        rng = torch.Generator().manual_seed(1)
        for _ in range(5):
            score = disc(
                torch.randn(2, 40, 45, generator=rng) * 5,
                torch.randn(2, 40, 26, generator=rng) * 5,
                torch.randn(2, 40, 768, generator=rng) * 5,
            )
            assert torch.all(score > 0) and torch.all(score < 1)

    def test_zero_weights_give_half(self):
        _, disc = init_params(0, FULL)
        with torch.no_grad():
            for p in disc.parameters():
                p.zero_()
        value = discriminator_forward(
            disc, np.ones((40, 45)), np.ones((40, 26)), np.ones((40, 768))
        )
        assert value == pytest.approx(0.5)

    def test_wrong_chunk_length(self):
        _, disc = init_params(0, FULL)
        with pytest.raises(ChunkSizeError):
            disc(torch.zeros(1, 39, 45), torch.zeros(1, 39, 26), torch.zeros(1, 39, 768))

    def test_unbounded_mode_not_squashed(self):
        dims = ModelDims(bounded=False)
        _, disc = init_params(0, dims)
        with torch.no_grad():
            disc.head[-1].bias.fill_(3.0)
        score = disc(
            torch.zeros(1, 40, 45), torch.zeros(1, 40, 26), torch.zeros(1, 40, 768)
        )
        assert score.item() >= 1.0  # a sigmoid output could never reach 1


class TestAblationVariants:
    def test_no_text_input_width(self):
        dims = ModelDims.from_config(TrainConfig(no_text=True))
        assert dims.input_dim == 46
        gen, disc = init_params(0, dims)
        out = gen(torch.randn(2, 15, 46), torch.randn(2, 135))
        assert out.shape == (2, 45)
        score = disc(torch.randn(2, 40, 45), audio=torch.randn(2, 40, 26))
        assert score.shape == (2,)

    def test_no_audio(self):
        dims = ModelDims.from_config(TrainConfig(no_audio=True))
        assert dims.input_dim == 788
        gen, disc = init_params(0, dims)
        score = disc(torch.randn(1, 40, 45), text=torch.randn(1, 40, 768))
        assert 0 < score.item() < 1

    def test_no_gru_keeps_downstream_shapes(self):
        dims = ModelDims.from_config(TrainConfig(no_gru=True))
        gen, _ = init_params(0, dims)
        assert not hasattr(gen, "gru")
        assert gen.flatten_fc.in_features == 15 * 814
        assert gen.flatten_fc.out_features == 3840
        out = gen(torch.randn(3, 15, 814), torch.randn(3, 135))
        assert out.shape == (3, 45)

    def test_no_film_ignores_context(self):
        dims = ModelDims.from_config(TrainConfig(no_film=True))
        gen, _ = init_params(0, dims)
        gen.eval()
        win = torch.randn(1, 15, 814)
        assert torch.equal(gen(win, None), gen(win, torch.randn(1, 135)))

    def test_prosodic_audio_width(self):
        dims = ModelDims.from_config(TrainConfig(audio_features="prosodic"))
        assert dims.audio_dim == 4
        assert dims.input_dim == 768 + 4 + 20


class TestGenerateSequence:
    def test_single_frame_uses_replicated_window(self):
        gen, _ = init_params(0, FULL)
        norm = default_norm()
        features = np.random.default_rng(0).standard_normal((1, 794))
        clip = generate_sequence(gen, norm, features, np.zeros(20), np.zeros(45))
        assert clip.frames.shape == (1, 45)
        # the same frame repeated 15 times must give the same pose
        win = sliding_windows(
            torch.as_tensor(np.hstack([features, np.zeros((1, 20))]).astype(np.float32)),
            15,
        )
        assert torch.equal(win[0], win[0][:1].expand(15, -1))

    def test_hundred_frames(self):
        gen, _ = init_params(0, FULL)
        norm = default_norm()
        features = np.random.default_rng(1).standard_normal((100, 794))
        clip = generate_sequence(gen, norm, features, np.ones(20), np.zeros(45))
        assert clip.frames.shape == (100, 45)
        assert clip.fps == 20.0
        assert clip.rep == "expmap"

    def test_deterministic_given_noise(self):
        gen, _ = init_params(2, FULL)
        norm = default_norm()
        features = np.random.default_rng(2).standard_normal((30, 794))
        noise = np.random.default_rng(3).standard_normal(20)
        a = generate_sequence(gen, norm, features, noise, np.zeros(45))
        b = generate_sequence(gen, norm, features, noise, np.zeros(45))
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_noise_changes_output(self):
        gen, _ = init_params(2, FULL)
        norm = default_norm()
        features = np.random.default_rng(4).standard_normal((30, 794))
        rng = np.random.default_rng(5)
        a = generate_sequence(gen, norm, features, rng.standard_normal(20), np.zeros(45))
        b = generate_sequence(gen, norm, features, rng.standard_normal(20), np.zeros(45))
        mean_diff = np.abs(a.frames - b.frames).mean()
        assert mean_diff > 0

    def test_feature_width_checked(self):
        gen, _ = init_params(0, FULL)
        with pytest.raises(InvalidInputError):
            generate_sequence(gen, default_norm(), np.zeros((10, 800)), np.zeros(20),
                              np.zeros(45))


class TestGenerationContext:
    def test_initialized_by_repetition(self):
        ctx = GenerationContext(np.arange(5, dtype=np.float32), size=3)
        np.testing.assert_array_equal(ctx.vector(), np.tile(np.arange(5), 3))

    def test_most_recent_first(self):
        ctx = GenerationContext(np.zeros(2, dtype=np.float32), size=3)
        ctx.push(np.array([1.0, 1.0]))
        ctx.push(np.array([2.0, 2.0]))
        np.testing.assert_array_equal(ctx.vector(), [2, 2, 1, 1, 0, 0])

    def test_generator_step_shape(self):
        gen, _ = init_params(0, FULL)
        ctx = GenerationContext(np.zeros(45, dtype=np.float32))
        pose = generator_step(gen, np.zeros((15, 814), dtype=np.float32), ctx)
        assert pose.shape == (45,)
        assert np.all(np.abs(pose) < 1)


class TestGradients:
    def test_generator_matches_finite_differences(self):
        assert run_generator_gradcheck(seed=0) <= 1e-4

    def test_discriminator_matches_finite_differences(self):
        assert run_discriminator_gradcheck(seed=0) <= 1e-4
