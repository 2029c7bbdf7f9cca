# app/schemas/model_spec.py
# 순차 CNN 설명. 레이어는 kind 로 구분되는 discriminated union 입니다.

from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.core.exceptions import ShapeMismatchError, UnknownLayerKindError
from app.engine.functional import conv_output_size
from app.schemas.base_schema import BaseModel


class Conv2dLayer(BaseModel):
    kind: Literal["conv2d"] = "conv2d"
    out_channels: int = Field(..., ge=1)
    kernel: int = Field(3, ge=1)
    stride: int = Field(1, ge=1)
    padding: int = Field(0, ge=0)
    dilation: int = Field(1, ge=1)


class DenseLayer(BaseModel):
    kind: Literal["dense"] = "dense"
    out_features: int = Field(..., ge=1)


class ReluLayer(BaseModel):
    kind: Literal["relu"] = "relu"


class MaxPoolLayer(BaseModel):
    kind: Literal["maxpool"] = "maxpool"
    kernel: int = Field(2, ge=1)
    stride: int | None = Field(None, ge=1)


class AvgPoolLayer(BaseModel):
    kind: Literal["avgpool"] = "avgpool"
    kernel: int = Field(2, ge=1)
    stride: int | None = Field(None, ge=1)


class FlattenLayer(BaseModel):
    kind: Literal["flatten"] = "flatten"


LayerSpec = Annotated[
    Union[Conv2dLayer, DenseLayer, ReluLayer, MaxPoolLayer, AvgPoolLayer, FlattenLayer],
    Field(discriminator="kind"),
]

LAYER_KINDS = ("conv2d", "dense", "relu", "maxpool", "avgpool", "flatten")
LINEAR_KINDS = frozenset({"conv2d", "dense"})
# 앞선 지점에 붙는 (자체 EvalPoint 가 없는) 레이어
ATTACHED_KINDS = frozenset({"maxpool", "avgpool", "flatten"})

Shape = tuple[int, ...]


def layer_output_shape(layer: Any, index: int, shape: Shape) -> Shape:
    """레이어 하나의 (배치 제외) 출력 모양. 호환되지 않으면 ShapeMismatchError."""
    where = f"layer {index} ({layer.kind})"
    if layer.kind == "conv2d":
        if len(shape) != 3:
            raise ShapeMismatchError(where, ("C", "H", "W"), shape)
        h = conv_output_size(shape[1], layer.kernel, layer.stride, layer.padding, layer.dilation)
        w = conv_output_size(shape[2], layer.kernel, layer.stride, layer.padding, layer.dilation)
        if h < 1 or w < 1:
            raise ShapeMismatchError(where, (layer.out_channels, max(h, 1), max(w, 1)), shape)
        return (layer.out_channels, h, w)
    if layer.kind == "dense":
        if len(shape) != 1:
            raise ShapeMismatchError(where, ("features",), shape)
        return (layer.out_features,)
    if layer.kind in ("maxpool", "avgpool"):
        if len(shape) != 3 or shape[1] < layer.kernel or shape[2] < layer.kernel:
            raise ShapeMismatchError(where, ("C", f">={layer.kernel}", f">={layer.kernel}"), shape)
        stride = layer.stride or layer.kernel
        return (shape[0], (shape[1] - layer.kernel) // stride + 1, (shape[2] - layer.kernel) // stride + 1)
    if layer.kind == "flatten":
        return (int(np.prod(shape)),)
    return shape


def parameter_shapes(layers: list[Any], input_shape: Shape) -> dict[str, Shape]:
    """파라미터 이름 → 모양. 이름은 '{레이어 인덱스}.weight' / '{레이어 인덱스}.bias'."""
    shapes: dict[str, Shape] = {}
    shape = tuple(input_shape)
    for index, layer in enumerate(layers):
        if layer.kind == "conv2d":
            shapes[f"{index}.weight"] = (layer.out_channels, shape[0], layer.kernel, layer.kernel)
            shapes[f"{index}.bias"] = (layer.out_channels,)
        elif layer.kind == "dense":
            shapes[f"{index}.weight"] = (layer.out_features, shape[0])
            shapes[f"{index}.bias"] = (layer.out_features,)
        shape = layer_output_shape(layer, index, shape)
    return shapes


class CryptoArch(BaseModel):
    """클라이언트와 딜러에게 공개되는 crypto prefix 구조. clear 레이어는 포함하지 않습니다."""

    layers: list[LayerSpec]
    input_shape: tuple[int, int, int]
    boundary: str
    frac_bits: int
    batch: int = Field(..., ge=1)

    def parameter_shapes(self) -> dict[str, Shape]:
        return parameter_shapes(self.layers, self.input_shape)


class ModelSpec(BaseModel):
    """
    서버 모델의 구조 설명.
    - 연속한 레이어의 모양이 맞물려야 합니다.
    - 마지막 레이어는 dense(num_classes) 입니다.
    - 블록당 ReLU 는 최대 하나이며 선형 연산 뒤에만 올 수 있습니다.
    """

    name: str = "custom"
    layers: list[LayerSpec] = Field(..., min_length=1)
    input_shape: tuple[int, int, int]
    num_classes: int = Field(..., ge=1)

    @field_validator("layers", mode="before")
    @classmethod
    def _known_kinds(cls, value: Any) -> Any:
        for layer in value or []:
            kind = layer.get("kind") if isinstance(layer, dict) else getattr(layer, "kind", None)
            if kind not in LAYER_KINDS:
                raise UnknownLayerKindError(str(kind))
        return value

    @model_validator(mode="after")
    def _check_structure(self) -> "ModelSpec":
        last = self.layers[-1]
        if last.kind != "dense" or last.out_features != self.num_classes:
            raise ValueError(f"last layer must be dense({self.num_classes}), got {last.kind}")
        seen_linear = False
        relu_in_block = False
        for index, layer in enumerate(self.layers):
            if layer.kind in LINEAR_KINDS:
                seen_linear, relu_in_block = True, False
            elif layer.kind == "relu":
                if not seen_linear or relu_in_block:
                    raise ValueError(f"layer {index}: relu must follow a linear layer, once per block")
                relu_in_block = True
        self.layer_shapes()
        return self

    def layer_shapes(self) -> list[Shape]:
        """각 레이어 출력의 (배치 제외) 모양."""
        shapes: list[Shape] = []
        shape: Shape = tuple(self.input_shape)
        for index, layer in enumerate(self.layers):
            shape = layer_output_shape(layer, index, shape)
            shapes.append(shape)
        return shapes

    def shape_after(self, cut: int) -> Shape:
        """앞에서 cut 개 레이어를 지난 활성값의 모양 (cut=0 이면 입력)."""
        return tuple(self.input_shape) if cut == 0 else self.layer_shapes()[cut - 1]

    def parametric_layers(self) -> list[int]:
        return [i for i, layer in enumerate(self.layers) if layer.kind in LINEAR_KINDS]

    def parameter_shapes(self) -> dict[str, Shape]:
        return parameter_shapes(self.layers, tuple(self.input_shape))
