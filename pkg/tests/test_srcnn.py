import numpy as np
import pytest

from aquaclear import (
    DivergenceError,
    FormatError,
    ImageF,
    OptimizerState,
    PaddingMode,
    ParameterError,
    PatchSampler,
    ShapeError,
    SrcnnModel,
    TrainBatch,
    TrainConfig,
    load_model,
    mse_loss,
    save_model,
    srcnn_backward,
    srcnn_forward,
    srcnn_init,
    super_resolve,
    train,
    train_step,
)
from aquaclear.synth import synth_scene

from oracles import finite_difference_grads, srcnn_forward_reference

TINY = TrainConfig(f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16)


def random_model(rng, channels=1, n1=2, n2=2, f1=3, f2=1, f3=3):
    return SrcnnModel(
        w1=rng.normal(0, 0.5, (n1, channels, f1, f1)),
        b1=rng.normal(0, 0.1, (n1,)),
        w2=rng.normal(0, 0.5, (n2, n1, f2, f2)),
        b2=rng.normal(0, 0.1, (n2,)),
        w3=rng.normal(0, 0.5, (channels, n2, f3, f3)),
        b3=rng.normal(0, 0.1, (channels,)),
    )


def identity_model(channels=1):
    """1x1 kernels that pass nonnegative input straight through all layers."""
    return SrcnnModel(
        w1=np.ones((1, channels, 1, 1)) if channels == 1 else _eye_w(channels),
        b1=np.zeros(channels if channels > 1 else 1),
        w2=np.eye(channels if channels > 1 else 1).reshape(-1, channels if channels > 1 else 1, 1, 1),
        b2=np.zeros(channels if channels > 1 else 1),
        w3=np.eye(channels if channels > 1 else 1).reshape(channels, -1, 1, 1),
        b3=np.zeros(channels),
    )


def _eye_w(c):
    return np.eye(c).reshape(c, c, 1, 1)


class TestTrainConfig:
    def test_rejects_negative_learning_rate(self):
        with pytest.raises(ParameterError):
            TrainConfig(learning_rate=-1e-4)

    def test_zero_learning_rate_allowed(self):
        assert TrainConfig(learning_rate=0.0).learning_rate == 0.0

    def test_rejects_unknown_optimizer(self):
        with pytest.raises(ParameterError):
            TrainConfig(optimizer="rmsprop")

    def test_rejects_even_kernel(self):
        with pytest.raises(ParameterError):
            TrainConfig(f1=8)

    def test_rejects_small_patch(self):
        with pytest.raises(ParameterError):
            TrainConfig(patch_size=8)


class TestInit:
    def test_same_seed_same_weights(self):
        a = srcnn_init(TINY, channels=1)
        b = srcnn_init(TINY, channels=1)
        for pa, pb in zip(a.params(), b.params()):
            np.testing.assert_array_equal(pa, pb)

    def test_different_seed_different_weights(self):
        a = srcnn_init(TINY, channels=1)
        b = srcnn_init(TrainConfig(f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16, seed=9), channels=1)
        assert not np.array_equal(a.w1, b.w1)

    def test_weight_spread_near_init_std(self):
        model = srcnn_init(TrainConfig(), channels=3)
        std = model.w1.std()
        assert 0.8e-3 < std < 1.2e-3

    def test_biases_start_at_zero(self):
        model = srcnn_init(TINY, channels=3)
        assert not model.b1.any() and not model.b2.any() and not model.b3.any()

    def test_shapes_follow_config(self):
        model = srcnn_init(TrainConfig(n1=7, n2=5, f1=9, f2=1, f3=5), channels=3)
        assert model.w1.shape == (7, 3, 9, 9)
        assert model.w2.shape == (5, 7, 1, 1)
        assert model.w3.shape == (3, 5, 5, 5)

    def test_rejects_two_channels(self):
        with pytest.raises(ShapeError):
            srcnn_init(TINY, channels=2)


class TestModelValidation:
    def test_rejects_layer_width_mismatch(self, rng):
        m = random_model(rng)
        with pytest.raises(ShapeError):
            SrcnnModel(m.w1, m.b1, rng.normal(size=(2, 3, 1, 1)), m.b2, m.w3, m.b3)

    def test_rejects_nonfinite_weights(self, rng):
        m = random_model(rng)
        bad = m.w1.copy()
        bad[0, 0, 0, 0] = np.nan
        with pytest.raises(ParameterError):
            SrcnnModel(bad, m.b1, m.w2, m.b2, m.w3, m.b3)

    def test_rejects_even_kernel(self, rng):
        with pytest.raises(ShapeError):
            random_model(rng, f1=4)


class TestForward:
    @pytest.mark.parametrize("padding", [PaddingMode.REPLICATE, PaddingMode.ZERO])
    def test_matches_reference_on_ten_models(self, rng, padding):
        for trial in range(10):
            channels = 1 if trial % 2 else 3
            model = random_model(rng, channels=channels)
            img = ImageF(rng.random((channels, 7, 9)))
            out = srcnn_forward(model, img, padding)
            ref = srcnn_forward_reference(
                model.params(), img.data, padding is PaddingMode.REPLICATE
            )
            np.testing.assert_allclose(out.data, ref, atol=1e-9)

    def test_zero_weights_output_is_bias(self):
        model = SrcnnModel(
            w1=np.zeros((2, 1, 3, 3)),
            b1=np.zeros(2),
            w2=np.zeros((2, 2, 1, 1)),
            b2=np.zeros(2),
            w3=np.zeros((1, 2, 3, 3)),
            b3=np.array([0.25]),
        )
        out = srcnn_forward(model, ImageF(np.random.default_rng(0).random((1, 8, 8))))
        np.testing.assert_array_equal(out.data, np.full((1, 8, 8), 0.25))

    def test_identity_chain_passes_input_through(self, rng):
        img = ImageF(rng.random((1, 8, 8)))
        out = srcnn_forward(identity_model(), img)
        np.testing.assert_array_equal(out.data, img.data)

    def test_output_not_clamped(self, rng):
        model = identity_model()
        boosted = SrcnnModel(model.w1, model.b1, model.w2, model.b2, model.w3, np.array([5.0]))
        out = srcnn_forward(boosted, ImageF(rng.random((1, 8, 8))))
        assert out.data.max() > 1.0

    def test_channel_mismatch_rejected(self, rng, make_image):
        with pytest.raises(ShapeError):
            srcnn_forward(random_model(rng, channels=1), make_image(channels=3))

    def test_interior_translation_equivariance(self, rng):
        # receptive field radius is 2 for a 3-1-3 model, so interiors 2 px
        # from every border must match under a pixel shift of the content
        model = random_model(rng, channels=1)
        pattern = rng.random((6, 6))
        a = np.zeros((1, 14, 14))
        b = np.zeros((1, 14, 14))
        a[0, 2:8, 2:8] = pattern
        b[0, 4:10, 5:11] = pattern
        ya = srcnn_forward(model, ImageF(a), PaddingMode.ZERO).data
        yb = srcnn_forward(model, ImageF(b), PaddingMode.ZERO).data
        np.testing.assert_allclose(ya[0, 2:10, 2:9], yb[0, 4:12, 5:12], atol=1e-12)


class TestMseLoss:
    def test_hand_value_two_images(self):
        pred = [ImageF(np.full((1, 4, 4), 0.1)), ImageF(np.full((1, 4, 4), 0.2))]
        target = [ImageF(np.zeros((1, 4, 4))), ImageF(np.zeros((1, 4, 4)))]
        assert mse_loss(pred, target) == pytest.approx((0.01 + 0.04) / 2, abs=1e-15)

    def test_zero_on_identical(self, make_image):
        img = make_image()
        assert mse_loss([img], [img]) == 0.0

    def test_empty_batch_rejected(self):
        with pytest.raises(ShapeError):
            mse_loss([], [])

    def test_length_mismatch_rejected(self, make_image):
        with pytest.raises(ShapeError):
            mse_loss([make_image()], [make_image(), make_image()])

    def test_shape_mismatch_rejected(self, make_image):
        with pytest.raises(ShapeError):
            mse_loss([make_image(height=8)], [make_image(height=9)])


class TestBackward:
    def make_batch(self, rng, model, n=2, size=8):
        inputs = [ImageF(rng.random((model.channels, size, size))) for _ in range(n)]
        targets = [ImageF(rng.random((model.channels, size, size))) for _ in range(n)]
        return TrainBatch(inputs=tuple(inputs), targets=tuple(targets))

    def test_zero_residual_gives_zero_grads(self, rng):
        model = random_model(rng)
        x = ImageF(rng.random((1, 8, 8)))
        y = srcnn_forward(model, x)
        batch = TrainBatch(inputs=(x,), targets=(ImageF(y.data),))
        loss, grads = srcnn_backward(model, batch)
        assert loss == 0.0
        for g in grads.params():
            assert np.max(np.abs(g)) <= 1e-12

    def test_loss_matches_mse_loss(self, rng):
        model = random_model(rng)
        batch = self.make_batch(rng, model)
        loss, _ = srcnn_backward(model, batch)
        preds = [srcnn_forward(model, x) for x in batch.inputs]
        assert loss == pytest.approx(mse_loss(preds, list(batch.targets)), abs=1e-12)

    @pytest.mark.parametrize("padding", [PaddingMode.REPLICATE, PaddingMode.ZERO])
    def test_matches_finite_differences(self, rng, padding):
        model = random_model(rng)
        batch = self.make_batch(rng, model, n=1)
        _, grads = srcnn_backward(model, batch, padding)

        def loss_fn():
            loss, _ = srcnn_backward(model, batch, padding)
            return loss

        fd = finite_difference_grads(loss_fn, model.params(), h=1e-5)
        for analytic, numeric in zip(grads.params(), fd):
            scale = np.maximum(np.abs(numeric), 1e-4)
            assert np.max(np.abs(analytic - numeric) / scale) < 1e-5

    def test_gradients_linear_in_residual(self, rng):
        model = random_model(rng)
        x = ImageF(rng.random((1, 8, 8)))
        y = srcnn_forward(model, x).data
        t = rng.random((1, 8, 8))
        single = TrainBatch(inputs=(x,), targets=(ImageF(np.clip(t, 0, 1)),))
        # target moved twice as far from the prediction doubles every gradient
        t2 = y - 2.0 * (y - np.clip(t, 0, 1))
        double = TrainBatch(inputs=(x,), targets=(ImageF(t2),))
        _, g1 = srcnn_backward(model, single)
        _, g2 = srcnn_backward(model, double)
        for a, b in zip(g1.params(), g2.params()):
            np.testing.assert_allclose(b, 2.0 * a, rtol=1e-9, atol=1e-15)

    def test_mixed_patch_sizes_rejected(self, rng):
        model = random_model(rng)
        batch = TrainBatch(
            inputs=(ImageF(rng.random((1, 8, 8))), ImageF(rng.random((1, 9, 9)))),
            targets=(ImageF(rng.random((1, 8, 8))), ImageF(rng.random((1, 9, 9)))),
        )
        with pytest.raises(ShapeError):
            srcnn_backward(model, batch)


class TestTrainStep:
    def make_batch(self, rng, channels=1):
        x = [ImageF(rng.random((channels, 8, 8))) for _ in range(2)]
        t = [ImageF(rng.random((channels, 8, 8))) for _ in range(2)]
        return TrainBatch(inputs=tuple(x), targets=tuple(t))

    def test_zero_learning_rate_leaves_model_unchanged(self, rng):
        model = random_model(rng)
        cfg = TrainConfig(learning_rate=0.0, f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16)
        updated, loss = train_step(model, self.make_batch(rng), cfg, OptimizerState.zeros(model))
        assert np.isfinite(loss)
        for before, after in zip(model.params(), updated.params()):
            np.testing.assert_array_equal(before, after)

    def test_first_sgd_step_is_plain_gradient_descent(self, rng):
        model = random_model(rng)
        batch = self.make_batch(rng)
        cfg = TrainConfig(
            learning_rate=0.01, optimizer="sgd", momentum=0.9,
            f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16,
        )
        _, grads = srcnn_backward(model, batch)
        updated, _ = train_step(model, batch, cfg, OptimizerState.zeros(model))
        for p, g, q in zip(model.params(), grads.params(), updated.params()):
            np.testing.assert_allclose(q, p - 0.01 * g, atol=1e-15)

    def test_adam_step_bounded_by_learning_rate(self, rng):
        # bias-corrected first step moves each weight by about lr, never much more
        model = random_model(rng)
        cfg = TrainConfig(learning_rate=0.01, f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16)
        updated, _ = train_step(model, self.make_batch(rng), cfg, OptimizerState.zeros(model))
        for p, q in zip(model.params(), updated.params()):
            assert np.max(np.abs(q - p)) <= 0.0101

    def test_state_step_counter_advances(self, rng):
        model = random_model(rng)
        state = OptimizerState.zeros(model)
        cfg = TrainConfig(learning_rate=1e-3, f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16)
        batch = self.make_batch(rng)
        model, _ = train_step(model, batch, cfg, state)
        model, _ = train_step(model, batch, cfg, state)
        assert state.step == 2

    def test_nonfinite_loss_raises_divergence(self, rng):
        model = random_model(rng)
        huge = SrcnnModel(
            model.w1 * 1e200, model.b1, model.w2 * 1e200, model.b2, model.w3, model.b3
        )
        cfg = TrainConfig(learning_rate=1e-3, f1=3, f2=1, f3=3, n1=2, n2=2, patch_size=16)
        state = OptimizerState.zeros(huge)
        state.step = 41
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError) as err:
                train_step(huge, self.make_batch(rng), cfg, state)
        assert err.value.iteration == 41


class TestTrainLoop:
    def make_sampler(self):
        scenes = [synth_scene(32, 32, seed=s) for s in (11, 12)]
        pairs = [(img, img) for img in scenes]
        return PatchSampler(pairs, patch_size=16, stride=14)

    def config(self, iterations):
        return TrainConfig(
            learning_rate=1e-3, iterations=iterations, batch_size=4,
            patch_size=16, patch_stride=14, seed=3, f1=3, f2=1, f3=3, n1=2, n2=2,
        )

    def test_zero_iterations_returns_initial_model(self):
        sampler = self.make_sampler()
        cfg = self.config(0)
        model, history = train(sampler, cfg, channels=3)
        assert history == []
        fresh = srcnn_init(cfg, channels=3)
        for a, b in zip(model.params(), fresh.params()):
            np.testing.assert_array_equal(a, b)

    def test_identical_seeds_identical_histories(self):
        cfg = self.config(6)
        model_a, hist_a = train(self.make_sampler(), cfg, channels=3)
        model_b, hist_b = train(self.make_sampler(), cfg, channels=3)
        assert hist_a == hist_b
        for a, b in zip(model_a.params(), model_b.params()):
            np.testing.assert_array_equal(a, b)

    def test_history_length_tracks_iterations(self):
        _, history = train(self.make_sampler(), self.config(5), channels=3)
        assert len(history) == 5


class TestModelFile:
    def test_round_trip_is_bit_exact(self, rng, tmp_path):
        model = srcnn_init(TINY, channels=3)
        path = tmp_path / "m.srcnn"
        save_model(model, path)
        loaded = load_model(path)
        for a, b in zip(model.params(), loaded.params()):
            np.testing.assert_array_equal(a, b)

    def test_second_generation_stable_for_trained_weights(self, rng, tmp_path):
        # float64 weights quantize once on the first save, then stay fixed
        model = random_model(rng)
        p1, p2 = tmp_path / "a.srcnn", tmp_path / "b.srcnn"
        save_model(model, p1)
        once = load_model(p1)
        save_model(once, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_file_size_is_header_plus_tensors(self, tmp_path):
        model = srcnn_init(TINY, channels=1)
        path = tmp_path / "m.srcnn"
        save_model(model, path)
        n_params = sum(p.size for p in model.params())
        assert path.stat().st_size == 32 + 4 * n_params

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "m.srcnn"
        save_model(srcnn_init(TINY, channels=1), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"JUNK"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_model(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "m.srcnn"
        save_model(srcnn_init(TINY, channels=1), path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (999).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_model(path)

    def test_truncated_header_rejected(self, tmp_path):
        path = tmp_path / "m.srcnn"
        path.write_bytes(b"SRCN\x01")
        with pytest.raises(FormatError):
            load_model(path)

    def test_truncated_tensor_rejected(self, tmp_path):
        path = tmp_path / "m.srcnn"
        save_model(srcnn_init(TINY, channels=1), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-10])
        with pytest.raises(FormatError):
            load_model(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "m.srcnn"
        save_model(srcnn_init(TINY, channels=1), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(FormatError):
            load_model(path)


class TestSuperResolve:
    def test_output_dimensions(self, rng):
        model = random_model(rng, channels=3)
        out = super_resolve(model, ImageF(rng.random((3, 10, 12))), scale_factor=2)
        assert (out.height, out.width) == (20, 24)

    def test_scale_one_identity_model_is_passthrough(self, rng):
        img = ImageF(rng.random((1, 12, 12)))
        out = super_resolve(identity_model(), img, scale_factor=1)
        np.testing.assert_allclose(out.data, img.data, atol=1e-9)

    def test_output_clamped(self, rng):
        model = identity_model()
        boosted = SrcnnModel(model.w1, model.b1, model.w2, model.b2, model.w3, np.array([5.0]))
        out = super_resolve(boosted, ImageF(rng.random((1, 8, 8))), scale_factor=1)
        assert out.data.max() <= 1.0

    def test_rejects_bad_scale(self, rng, make_image):
        with pytest.raises(ParameterError):
            super_resolve(random_model(rng, channels=3), make_image(), scale_factor=0)

    def test_rejects_channel_mismatch(self, rng, make_image):
        with pytest.raises(ShapeError):
            super_resolve(random_model(rng, channels=1), make_image(channels=3))
