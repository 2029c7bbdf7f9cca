# app/models/inversion.py
# 공격자의 역변환 모델 M*. 서브 블록마다 basic inverse block 하나.

from dataclasses import dataclass

import numpy as np

from app.core.exceptions import ShapeMismatchError
from app.engine import functional as F
from app.engine.init import conv_params, dense_params
from app.engine.tensor import Tensor
from app.schemas.attack import InverseBlockSpec, InversionModelSpec

DILATION = 2
KERNEL = 3


def inverse_block_spec(input_shape: tuple[int, ...], output_shape: tuple[int, ...]) -> InverseBlockSpec:
    """서브 블록 출력 모양 → 입력 모양의 역변환 블록 구조."""
    if len(input_shape) == 3:
        if len(output_shape) != 3:
            raise ShapeMismatchError("inverse block (spatial input needs spatial output)", ("C", "H", "W"), output_shape)
        factor = output_shape[1] // input_shape[1]
        if factor < 1 or output_shape[1] != input_shape[1] * factor or output_shape[2] != input_shape[2] * factor:
            raise ShapeMismatchError(
                "inverse block upsample (resolution must scale by an integer factor)",
                (output_shape[0], input_shape[1] * max(factor, 1), input_shape[2] * max(factor, 1)),
                output_shape,
            )
        return InverseBlockSpec(kind="conv", input_shape=input_shape, output_shape=output_shape, upsample=factor)
    return InverseBlockSpec(kind="dense", input_shape=input_shape, output_shape=output_shape)


def _init_block(rng: np.random.Generator, index: int, block: InverseBlockSpec) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}

    def put(name: str, values: dict[str, np.ndarray]) -> None:
        params[f"{index}.{name}.weight"] = values["weight"]
        params[f"{index}.{name}.bias"] = values["bias"]

    if block.kind == "conv":
        channels, out_channels = block.input_shape[0], block.output_shape[0]
        put("res1", conv_params(rng, channels, channels, KERNEL))
        put("res2", conv_params(rng, channels, channels, KERNEL))
        put("dilated", conv_params(rng, out_channels, channels, KERNEL))
    else:
        features = int(np.prod(block.input_shape))
        put("res1", dense_params(rng, features, features))
        put("res2", dense_params(rng, features, features))
        put("proj", dense_params(rng, int(np.prod(block.output_shape)), features))
    return params


def _run_block(index: int, block: InverseBlockSpec, params: dict[str, Tensor], x: Tensor) -> Tensor:
    def p(name: str) -> tuple[Tensor, Tensor]:
        return params[f"{index}.{name}.weight"], params[f"{index}.{name}.bias"]

    if block.kind == "conv":
        h = F.relu(F.conv2d(x, *p("res1"), padding=1))
        h = F.conv2d(h, *p("res2"), padding=1)
        y = F.relu(F.add(x, h))
        if block.upsample > 1:
            y = F.upsample_nearest(y, block.upsample)
        return F.conv2d(y, *p("dilated"), padding=DILATION, dilation=DILATION)

    if len(x.shape) != 2:
        x = F.flatten(x)
    h = F.relu(F.dense(x, *p("res1")))
    h = F.dense(h, *p("res2"))
    y = F.relu(F.add(x, h))
    out = F.dense(y, *p("proj"))
    return F.reshape(out, block.output_shape) if len(block.output_shape) > 1 else out


@dataclass(eq=False)
class InversionNetwork:
    """
    blocks 는 서브 블록 순서, 실행은 역순입니다 (boundary 활성값 → ... → 복원 이미지).
    블록이 없으면 (입력 지점 공격) 항등 함수입니다.
    """

    spec: InversionModelSpec
    params: dict[str, np.ndarray]

    @classmethod
    def initialize(cls, spec: InversionModelSpec, seed: int) -> "InversionNetwork":
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}
        for index, block in enumerate(spec.blocks):
            params.update(_init_block(rng, index, block))
        return cls(spec, params)

    def forward(self, x: Tensor, params: dict[str, Tensor] | None = None) -> tuple[Tensor, list[Tensor | None]]:
        """
        (복원 결과, 블록별 입력) 을 돌려줍니다. block_inputs[j] 는 inverse block j 의 입력 I_j 입니다.
        params 를 주면 (학습 중 테이프에 기록할 텐서) 그것을 사용합니다.
        """
        if x.shape[1:] != tuple(self.spec.input_shape):
            raise ShapeMismatchError("inversion input", ("N", *self.spec.input_shape), x.shape)
        tensors = params if params is not None else {k: Tensor(v, name=k) for k, v in self.params.items()}
        block_inputs: list[Tensor | None] = [None] * len(self.spec.blocks)
        for index in reversed(range(len(self.spec.blocks))):
            block_inputs[index] = x
            x = _run_block(index, self.spec.blocks[index], tensors, x)
        return x, block_inputs

    def invert(self, activation: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(activation))[0].data
