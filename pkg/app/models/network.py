# app/models/network.py
# 학습된 서버 모델과 EvalPoint 기반 prefix/suffix 실행

from dataclasses import dataclass, field

import numpy as np

from app.core.exceptions import EvalPointError, ShapeMismatchError
from app.engine import functional as F
from app.engine.tensor import Tensor
from app.schemas.eval_point import EvalPoint
from app.schemas.model_spec import ATTACHED_KINDS, LINEAR_KINDS, ModelSpec
from app.schemas.training import TrainingMeta


def point_extents(spec: ModelSpec) -> dict[EvalPoint, int]:
    """
    EvalPoint → prefix 에 포함되는 레이어 수 (실행 순서).
    풀링/flatten 은 직전 지점에 붙고, 첫 선형 연산 앞의 비파라미터 레이어는 블록 1 에 속합니다.
    """
    extents: dict[EvalPoint, int] = {}
    layers = spec.layers
    block = 0
    index = 0
    while index < len(layers):
        kind = layers[index].kind
        if kind in LINEAR_KINDS:
            block += 1
            point = EvalPoint(block=block)
        elif kind == "relu":
            point = EvalPoint(block=block, post_relu=True)
        else:
            index += 1
            continue
        end = index + 1
        while end < len(layers) and layers[end].kind in ATTACHED_KINDS:
            end += 1
        extents[point] = end
        index = end
    return extents


def eval_points(spec: ModelSpec) -> list[EvalPoint]:
    """선형 블록 출력과 ReLU 출력마다 하나씩, 실행 순서대로."""
    return list(point_extents(spec))


def prefix_cut(spec: ModelSpec, point: EvalPoint, allow_input: bool = False) -> int:
    if point.block == 0:
        if allow_input:
            return 0
        raise EvalPointError("EvalPoint 0 (raw input) is only valid for attacks")
    extents = point_extents(spec)
    if point not in extents:
        rendered = ", ".join(p.render() for p in extents)
        raise EvalPointError(f"EvalPoint {point.render()} is out of range for {spec.name} (valid: {rendered})")
    return extents[point]


def next_point(spec: ModelSpec, point: EvalPoint) -> EvalPoint | None:
    points = eval_points(spec)
    position = points.index(point)
    return points[position + 1] if position + 1 < len(points) else None


def apply_layers(
    spec: ModelSpec,
    params: dict[str, Tensor],
    x: Tensor,
    start: int = 0,
    stop: int | None = None,
) -> Tensor:
    """spec.layers[start:stop] 를 순서대로 실행합니다. 활성 테이프가 있으면 기록됩니다."""
    stop = len(spec.layers) if stop is None else stop
    for index in range(start, stop):
        layer = spec.layers[index]
        if layer.kind == "conv2d":
            x = F.conv2d(
                x, params[f"{index}.weight"], params[f"{index}.bias"],
                layer.stride, layer.padding, layer.dilation,
            )
        elif layer.kind == "dense":
            x = F.dense(x, params[f"{index}.weight"], params[f"{index}.bias"])
        elif layer.kind == "relu":
            x = F.relu(x)
        elif layer.kind == "maxpool":
            x = F.maxpool2d(x, layer.kernel, layer.stride)
        elif layer.kind == "avgpool":
            x = F.avgpool2d(x, layer.kernel, layer.stride)
        else:
            x = F.flatten(x)
    return x


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """
    학습이 끝난 서버 모델. 가중치 배열은 읽기 전용이므로 여러 스레드에서 추론에 공유할 수 있습니다.
    """

    spec: ModelSpec
    weights: dict[str, np.ndarray]
    training_meta: TrainingMeta | None = None
    _tensors: dict[str, Tensor] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        expected = self.spec.parameter_shapes()
        if set(expected) != set(self.weights):
            missing = sorted(set(expected) ^ set(self.weights))
            raise ShapeMismatchError(f"weights of {self.spec.name} (names {missing})", (), ())
        frozen: dict[str, np.ndarray] = {}
        for name, shape in expected.items():
            value = np.array(self.weights[name], dtype=np.float64, copy=True)
            if value.shape != shape:
                raise ShapeMismatchError(f"parameter {name}", shape, value.shape)
            value.flags.writeable = False
            frozen[name] = value
        object.__setattr__(self, "weights", frozen)
        object.__setattr__(self, "_tensors", {k: Tensor(v, name=k) for k, v in frozen.items()})

    @property
    def points(self) -> list[EvalPoint]:
        return eval_points(self.spec)

    def activation_shape(self, point: EvalPoint) -> tuple[int, ...]:
        return self.spec.shape_after(prefix_cut(self.spec, point, allow_input=True))

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != tuple(self.spec.input_shape) or x.ndim != 4:
            raise ShapeMismatchError("model input", ("N", *self.spec.input_shape), x.shape)
        return x

    def forward_full(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        return apply_layers(self.spec, self._tensors, Tensor(x)).data

    def forward_prefix(self, x: np.ndarray, point: EvalPoint, allow_input: bool = False) -> np.ndarray:
        x = self._check_input(x)
        cut = prefix_cut(self.spec, point, allow_input)
        return apply_layers(self.spec, self._tensors, Tensor(x), 0, cut).data

    def forward_suffix(self, a: np.ndarray, point: EvalPoint) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        cut = prefix_cut(self.spec, point, allow_input=True)
        expected = self.spec.shape_after(cut)
        if a.shape[1:] != expected:
            raise ShapeMismatchError(f"forward_suffix at {point.render()}", ("N", *expected), a.shape)
        return apply_layers(self.spec, self._tensors, Tensor(a), cut).data

    def prefix_tensor(self, x: Tensor, point: EvalPoint) -> Tensor:
        """테이프에 기록되는 prefix 실행 (MLA 처럼 입력 기울기가 필요한 경우)."""
        cut = prefix_cut(self.spec, point, allow_input=True)
        return apply_layers(self.spec, self._tensors, x, 0, cut)
