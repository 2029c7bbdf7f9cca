import numpy as np
import pytest

from app.crypto.circuit import encode_constants, fixed_forward
from app.crypto.fixed_point import decode
from app.models.network import TrainedModel, prefix_cut
from app.models.zoo import init_weights
from app.schemas.eval_point import EvalPoint
from app.schemas.model_spec import ModelSpec


class TestFixedForward:
    def test_matches_plaintext_logits(self, toy_model, dataset):
        x = dataset.images[:2]
        ring = fixed_forward(toy_model.spec, toy_model.weights, x, len(toy_model.spec.layers))
        np.testing.assert_allclose(decode(ring), toy_model.forward_full(x), atol=1e-3)

    @pytest.mark.parametrize("point", ["1", "1.5", "2", "2.5"])
    def test_matches_plaintext_prefix(self, toy_model, dataset, point):
        x = dataset.images[:2]
        target = EvalPoint.parse(point)
        ring = fixed_forward(toy_model.spec, toy_model.weights, x, prefix_cut(toy_model.spec, target))
        np.testing.assert_allclose(decode(ring), toy_model.forward_prefix(x, target), atol=1e-3)

    def test_avgpool_model(self, dataset):
        spec = ModelSpec(
            name="avg_cnn",
            layers=[
                {"kind": "conv2d", "out_channels": 4, "kernel": 3, "padding": 1},
                {"kind": "relu"},
                {"kind": "avgpool", "kernel": 2},
                {"kind": "flatten"},
                {"kind": "dense", "out_features": 3},
            ],
            input_shape=(3, 8, 8),
            num_classes=3,
        )
        model = TrainedModel(spec, init_weights(spec, 3))
        x = dataset.images[:1]
        ring = fixed_forward(spec, model.weights, x, len(spec.layers))
        np.testing.assert_allclose(decode(ring), model.forward_full(x), atol=1e-3)


def test_bias_uses_double_scale(toy_model):
    constants = encode_constants(toy_model.weights)
    expected = np.round(toy_model.weights["0.bias"] * 2.0**32).astype(np.int64).view(np.uint64)
    np.testing.assert_array_equal(constants["0.bias"], expected)
