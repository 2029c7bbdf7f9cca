# app/models/zoo.py
# 데스크 스케일 모델 모음. 모든 빌더는 입력 모양과 클래스 수를 받아 ModelSpec 을 돌려줍니다.

from typing import Callable

import numpy as np

from app.core.exceptions import ConfigError
from app.engine.init import conv_params, dense_params
from app.schemas.model_spec import ModelSpec

Shape3 = tuple[int, int, int]


def _conv(out_channels: int) -> dict:
    return {"kind": "conv2d", "out_channels": out_channels, "kernel": 3, "padding": 1}


RELU = {"kind": "relu"}
POOL = {"kind": "maxpool", "kernel": 2}
FLATTEN = {"kind": "flatten"}


def _dense(out_features: int) -> dict:
    return {"kind": "dense", "out_features": out_features}


def toy_cnn(input_shape: Shape3, num_classes: int) -> ModelSpec:
    """conv-relu-pool ×2 + dense. 블록 3개."""
    layers = [_conv(8), RELU, POOL, _conv(16), RELU, POOL, FLATTEN, _dense(num_classes)]
    return ModelSpec(name="toy_cnn", layers=layers, input_shape=input_shape, num_classes=num_classes)


def tiny_alex(input_shape: Shape3, num_classes: int) -> ModelSpec:
    layers = [
        _conv(8), RELU, POOL,
        _conv(16), RELU, POOL,
        _conv(16), RELU,
        FLATTEN, _dense(32), RELU,
        _dense(num_classes),
    ]
    return ModelSpec(name="tiny_alex", layers=layers, input_shape=input_shape, num_classes=num_classes)


def tiny_vgg8(input_shape: Shape3, num_classes: int) -> ModelSpec:
    layers = [
        _conv(8), RELU, _conv(8), RELU, POOL,
        _conv(16), RELU, _conv(16), RELU, POOL,
        _conv(32), RELU, _conv(32), RELU, POOL,
        FLATTEN, _dense(32), RELU,
        _dense(num_classes),
    ]
    return ModelSpec(name="tiny_vgg8", layers=layers, input_shape=input_shape, num_classes=num_classes)


def tiny_vgg11(input_shape: Shape3, num_classes: int) -> ModelSpec:
    layers = [
        _conv(8), RELU, POOL,
        _conv(16), RELU, POOL,
        _conv(32), RELU, _conv(32), RELU, POOL,
        _conv(32), RELU, _conv(32), RELU,
        _conv(32), RELU, _conv(32), RELU,
        FLATTEN, _dense(32), RELU, _dense(32), RELU,
        _dense(num_classes),
    ]
    return ModelSpec(name="tiny_vgg11", layers=layers, input_shape=input_shape, num_classes=num_classes)


MODEL_BUILDERS: dict[str, Callable[[Shape3, int], ModelSpec]] = {
    "toy_cnn": toy_cnn,
    "tiny_alex": tiny_alex,
    "tiny_vgg8": tiny_vgg8,
    "tiny_vgg11": tiny_vgg11,
}


def build_spec(name: str, input_shape: Shape3, num_classes: int) -> ModelSpec:
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r} (choose from {', '.join(MODEL_BUILDERS)})") from None
    return builder(tuple(input_shape), num_classes)


def init_weights(spec: ModelSpec, seed: int) -> dict[str, np.ndarray]:
    """U[−√(1/fan_in), √(1/fan_in)] 초기화. 파라미터 레이어 순서대로 같은 생성기를 사용합니다."""
    rng = np.random.default_rng(seed)
    weights: dict[str, np.ndarray] = {}
    for index in spec.parametric_layers():
        layer = spec.layers[index]
        in_shape = spec.shape_after(index)
        if layer.kind == "conv2d":
            params = conv_params(rng, layer.out_channels, in_shape[0], layer.kernel)
        else:
            params = dense_params(rng, layer.out_features, in_shape[0])
        weights[f"{index}.weight"] = params["weight"]
        weights[f"{index}.bias"] = params["bias"]
    return weights
