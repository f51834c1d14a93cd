"""Forecaster wiring: shapes, branch toggles, determinism, checkpoints."""

import numpy as np
import pytest

from oracles import numeric_grad, rel_err
from tcnad.autodiff import Tape, Tensor, backward, rmse_loss
from tcnad.data import DataFormatError, NormalizationStats
from tcnad.forecaster import (
    ModelConfig,
    forward,
    init_forecaster,
    load_checkpoint,
    predict,
    save_checkpoint,
)

TINY = ModelConfig(window=8, conv_kernel=3, tcn_kernel=2, tcn_channels=4,
                   dilations=(1, 2), mlp_layers=2, mlp_units=4, dropout=0.0)


class TestShapes:
    def test_default_config_shapes(self):
        cfg = ModelConfig()
        params = init_forecaster(25, cfg, seed=0)
        assert params.concat_width == 75
        assert params.tcn.blocks[0].conv1_filters.values.shape == (4, 75, 32)
        assert params.preconv_filters.values.shape == (7, 25, 25)
        assert params.temporal.weight.values.shape == (25, 50)
        assert params.variable.weight.values.shape == (100, 200)
        assert len(params.mlp) == 3  # two hidden layers + output
        x = np.random.default_rng(42).standard_normal((100, 25))
        assert predict(params, x).shape == (25,)

    def test_branch_toggles_change_concat_width(self):
        m = 3
        for temporal, variable, width in [(True, True, 9), (True, False, 6),
                                          (False, True, 6), (False, False, 3)]:
            cfg = ModelConfig(window=8, tcn_channels=4, mlp_units=4,
                              temporal_attention=temporal, variable_attention=variable)
            params = init_forecaster(m, cfg, seed=0)
            assert params.concat_width == width
            assert (params.temporal is None) == (not temporal)
            assert (params.variable is None) == (not variable)
            assert params.tcn.blocks[0].conv1_filters.values.shape[1] == width
            x = np.random.default_rng(0).standard_normal((8, m))
            assert predict(params, x).shape == (m,)

    def test_static_attention_mode(self):
        cfg = ModelConfig(window=8, tcn_channels=4, mlp_units=4, attention_mode="static")
        params = init_forecaster(3, cfg, seed=0)
        assert params.temporal.mode == "static"
        assert params.temporal.weight.values.shape == (3, 3)
        assert params.temporal.score_vec.values.shape == (6,)
        x = np.random.default_rng(0).standard_normal((8, 3))
        assert predict(params, x).shape == (3,)

    def test_rejects_wrong_window_shape(self):
        params = init_forecaster(3, TINY, seed=0)
        with pytest.raises(ValueError):
            predict(params, np.zeros((9, 3)))
        with pytest.raises(ValueError):
            predict(params, np.zeros((8, 2)))

    def test_mlp_zero_hidden_layers(self):
        cfg = ModelConfig(window=8, tcn_channels=4, mlp_layers=0)
        params = init_forecaster(2, cfg, seed=0)
        assert len(params.mlp) == 1
        assert params.mlp[0][0].values.shape == (4, 2)


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        {"window": 0},
        {"conv_kernel": 0},
        {"dilations": ()},
        {"dilations": (1, 0)},
        {"dropout": 1.0},
        {"dropout": -0.1},
        {"attention_mode": "both"},
        {"attention_activation": "relu"},
        {"mlp_layers": -1},
    ])
    def test_bad_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ModelConfig(**kwargs)


class TestDeterminism:
    def test_init_is_seeded(self):
        a = init_forecaster(3, TINY, seed=7)
        b = init_forecaster(3, TINY, seed=7)
        for (na, ta), (nb, tb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(ta.values, tb.values)
        c = init_forecaster(3, TINY, seed=8)
        assert any(
            not np.array_equal(ta.values, tc.values)
            for (_, ta), (_, tc) in zip(a.named_parameters(), c.named_parameters())
        )

    def test_inference_is_deterministic(self):
        params = init_forecaster(3, TINY, seed=0)
        x = np.random.default_rng(1).standard_normal((8, 3))
        np.testing.assert_array_equal(predict(params, x), predict(params, x))

    def test_training_mode_needs_rng_when_dropout_active(self):
        cfg = ModelConfig(window=8, tcn_channels=4, mlp_units=4, dropout=0.2)
        params = init_forecaster(3, cfg, seed=0)
        x = Tensor(np.zeros((8, 3)))
        with pytest.raises(ValueError):
            forward(x, params, training=True)


class TestGradientFlow:
    def test_every_parameter_gets_a_gradient(self):
        params = init_forecaster(3, TINY, seed=0)
        rng = np.random.default_rng(2)
        with Tape():
            loss = rmse_loss(
                forward(Tensor(rng.standard_normal((8, 3))), params),
                Tensor(rng.standard_normal(3)),
            )
            backward(loss)
        for name, t in params.named_parameters():
            assert t.grad is not None, name
            assert np.any(t.grad != 0), name

    def test_spot_check_against_fd(self):
        params = init_forecaster(2, TINY, seed=3)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((8, 2))
        y = rng.standard_normal(2)

        def run():
            return rmse_loss(forward(Tensor(x), params), Tensor(y))

        with Tape():
            backward(run())
        for name, t in params.named_parameters():
            coords = rng.choice(t.values.size, size=min(2, t.values.size), replace=False)
            num = numeric_grad(lambda: float(run().values), t.values, coords, eps=1e-5)
            for idx, val in num.items():
                assert rel_err(t.grad.ravel()[idx], val) < 1e-4, name

    def test_single_adam_step_reduces_loss(self):
        from tcnad.optim import AdamState, adam_step

        decreases = 0
        for seed in range(20):
            params = init_forecaster(2, TINY, seed=seed)
            rng = np.random.default_rng(1000 + seed)
            x, y = rng.standard_normal((8, 2)), rng.standard_normal(2)

            with Tape():
                loss = rmse_loss(forward(Tensor(x), params), Tensor(y))
                backward(loss)
            before = float(loss.values)
            adam_step(params.tensors(), AdamState(learning_rate=1e-4))
            after = float(rmse_loss(forward(Tensor(x), params), Tensor(y)).values)
            decreases += after < before
        assert decreases >= 15


class TestCheckpoints:
    def test_roundtrip_bit_exact(self, tmp_path):
        params = init_forecaster(3, TINY, seed=5)
        stats = NormalizationStats(
            minimum=np.array([0.0, -1.5, 2.0]), maximum=np.array([1.0, 3.5, 2.0])
        )
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, stats)
        loaded, loaded_stats = load_checkpoint(path)
        for (na, ta), (nb, tb) in zip(params.named_parameters(), loaded.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(ta.values, tb.values)
        np.testing.assert_array_equal(loaded_stats.minimum, stats.minimum)
        np.testing.assert_array_equal(loaded_stats.maximum, stats.maximum)
        assert loaded_stats.mode == "per_feature"
        assert loaded.config == params.config
        x = np.random.default_rng(0).standard_normal((8, 3))
        np.testing.assert_array_equal(predict(params, x), predict(loaded, x))

    def test_roundtrip_without_stats(self, tmp_path):
        params = init_forecaster(2, TINY, seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params)
        _, stats = load_checkpoint(path)
        assert stats is None

    def test_ablated_model_roundtrip(self, tmp_path):
        cfg = ModelConfig(window=8, tcn_channels=4, mlp_units=4,
                          temporal_attention=False)
        params = init_forecaster(3, cfg, seed=1)
        path = tmp_path / "abl.ckpt"
        save_checkpoint(path, params)
        loaded, _ = load_checkpoint(path)
        assert loaded.temporal is None
        assert loaded.config.temporal_attention is False
        x = np.random.default_rng(0).standard_normal((8, 3))
        np.testing.assert_array_equal(predict(params, x), predict(loaded, x))

    def test_save_is_byte_deterministic(self, tmp_path):
        params = init_forecaster(2, TINY, seed=9)
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, params)
        save_checkpoint(b, params)
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(DataFormatError):
            load_checkpoint(path)
        path.write_text("not json at all {")
        with pytest.raises(DataFormatError):
            load_checkpoint(path)

    def test_rejects_missing_and_extra_tensors(self, tmp_path):
        import json

        params = init_forecaster(2, TINY, seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params)
        doc = json.loads(path.read_text())

        broken = dict(doc)
        broken["tensors"] = dict(doc["tensors"])
        broken["tensors"].pop("preconv.bias")
        path.write_text(json.dumps(broken))
        with pytest.raises(DataFormatError, match="missing tensor"):
            load_checkpoint(path)

        broken = dict(doc)
        broken["tensors"] = dict(doc["tensors"])
        broken["tensors"]["stray"] = doc["tensors"]["preconv.bias"]
        path.write_text(json.dumps(broken))
        with pytest.raises(DataFormatError, match="unexpected tensors"):
            load_checkpoint(path)

    def test_rejects_shape_mismatch(self, tmp_path):
        import json

        params = init_forecaster(2, TINY, seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params)
        doc = json.loads(path.read_text())
        doc["tensors"]["preconv.bias"]["shape"] = [1]
        # keep the payload length consistent with the claimed shape
        import base64

        doc["tensors"]["preconv.bias"]["data"] = base64.b64encode(
            np.zeros(1).tobytes()
        ).decode()
        path.write_text(json.dumps(doc))
        with pytest.raises(DataFormatError, match="shape"):
            load_checkpoint(path)
