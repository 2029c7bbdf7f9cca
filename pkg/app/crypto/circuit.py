# app/crypto/circuit.py
# crypto prefix 의 레이어 순회. 평문 고정소수점 오라클과 프로토콜 파티가 같은 순회 코드를 공유합니다.

import asyncio
from typing import Any, Sequence

import numpy as np

from app.crypto.fixed_point import DEFAULT_FIXED, RING_DTYPE, encode, positive_bit, truncate
from app.crypto.ring_ops import MUL, BilinearOp, ring_mul, window_slices
from app.schemas.model_spec import ModelSpec
from app.schemas.session import FixedCfg

RingConstants = dict[str, np.ndarray]
Shape = tuple[int, ...]


def linear_op(layer: Any) -> BilinearOp:
    if layer.kind == "conv2d":
        return BilinearOp("conv2d", layer.stride, layer.padding, layer.dilation)
    return BilinearOp("dense")


def encode_constants(weights: dict[str, np.ndarray], cfg: FixedCfg = DEFAULT_FIXED) -> RingConstants:
    """가중치는 f 비트, bias 는 곱셈 결과와 같은 2f 비트 스케일로 인코딩합니다."""
    return {
        name: encode(value, cfg, frac_bits=2 * cfg.frac_bits if name.endswith(".bias") else None)
        for name, value in weights.items()
    }


class CircuitRuntime:
    """
    레이어 순회가 호출하는 원시 연산의 기본 구현 (평문 고정소수점).
    constants 가 있는 파티(서버, 평문 오라클)만 가중치와 bias 를 가집니다. 나머지는 0 share 를 씁니다.
    """

    def __init__(
        self,
        param_shapes: dict[str, Shape],
        cfg: FixedCfg = DEFAULT_FIXED,
        constants: RingConstants | None = None,
    ):
        self.param_shapes = param_shapes
        self.cfg = cfg
        self.constants = constants

    def weight(self, name: str) -> np.ndarray:
        if self.constants is None:
            return np.zeros(self.param_shapes[name], dtype=RING_DTYPE)
        return self.constants[name]

    def add_bias(self, z: np.ndarray, name: str) -> np.ndarray:
        if self.constants is None:
            return z
        bias = self.constants[name]
        return z + (bias[None, :, None, None] if z.ndim == 4 else bias[None, :])

    async def product(self, x: np.ndarray, y: np.ndarray, op: BilinearOp, label: str) -> np.ndarray:
        return op(x, y)

    async def truncate(self, z: np.ndarray, label: str) -> np.ndarray:
        return truncate(z, self.cfg.frac_bits)

    async def sign(self, x: np.ndarray, label: str) -> np.ndarray:
        return positive_bit(x)


async def _relu(rt: CircuitRuntime, x: np.ndarray, label: str) -> np.ndarray:
    bit = await rt.sign(x, label)
    return await rt.product(bit, x, MUL, label)


async def evaluate_layers(layers: Sequence[Any], x: np.ndarray, rt: CircuitRuntime) -> np.ndarray:
    """
    layers 를 링 위에서 실행합니다. x 는 이 파티의 share (평문 오라클이면 인코딩된 입력).
    - 선형: op(x, W) + bias(2f) 후 f 비트 절단
    - relu: [x > 0] · x
    - maxpool: 행 우선 오프셋 순서로 m ← m + relu(t − m)
    - avgpool: 조각 합 × enc(1/k²) 후 절단
    """
    for index, layer in enumerate(layers):
        label = f"{index}:{layer.kind}"
        if layer.kind in ("conv2d", "dense"):
            z = await rt.product(x, rt.weight(f"{index}.weight"), linear_op(layer), label)
            x = await rt.truncate(rt.add_bias(z, f"{index}.bias"), label)
        elif layer.kind == "relu":
            x = await _relu(rt, x, label)
        elif layer.kind == "maxpool":
            slices = window_slices(x, layer.kernel, layer.stride or layer.kernel)
            m = np.ascontiguousarray(slices[0])
            for t in slices[1:]:
                m = m + await _relu(rt, np.ascontiguousarray(t) - m, label)
            x = m
        elif layer.kind == "avgpool":
            kernel = layer.kernel
            slices = window_slices(x, kernel, layer.stride or kernel)
            total = np.sum(np.stack(slices), axis=0, dtype=RING_DTYPE)
            reciprocal = encode(1.0 / (kernel * kernel), rt.cfg)
            x = await rt.truncate(ring_mul(total, reciprocal), label)
        else:
            x = x.reshape(x.shape[0], -1)
    return x


def fixed_forward(
    spec: ModelSpec,
    weights: dict[str, np.ndarray],
    x: np.ndarray,
    stop: int,
    cfg: FixedCfg = DEFAULT_FIXED,
) -> np.ndarray:
    """프로토콜과 정확히 같은 정수 연산을 평문으로 수행하는 오라클. 링 값을 돌려줍니다."""
    runtime = CircuitRuntime(spec.parameter_shapes(), cfg, encode_constants(weights, cfg))
    return asyncio.run(evaluate_layers(spec.layers[:stop], encode(x, cfg), runtime))
