# app/crypto/ring_ops.py
# uint64 링 위의 쌍선형 연산. 평문 엔진과 같은 윈도우 코드를 사용합니다.

from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.exceptions import ShapeMismatchError
from app.engine.functional import conv_output_size, conv_windows
from app.crypto.fixed_point import RING_DTYPE


def ring_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.multiply(a, b, dtype=RING_DTYPE)


def ring_dense(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """x (N, in) · wᵀ (in, out) mod 2^64."""
    with np.errstate(over="ignore"):
        return np.matmul(x, w.T).astype(RING_DTYPE, copy=False)


def ring_conv2d(
    x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0, dilation: int = 1
) -> np.ndarray:
    windows = conv_windows(x, w.shape[2], stride, padding, dilation)
    with np.errstate(over="ignore"):
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)).astype(RING_DTYPE, copy=False)


def window_slices(x: np.ndarray, kernel: int, stride: int) -> list[np.ndarray]:
    """풀링 윈도우의 각 오프셋을 행 우선 순서로 잘라낸 (N, C, Ho, Wo) 조각들."""
    h_out = (x.shape[2] - kernel) // stride + 1
    w_out = (x.shape[3] - kernel) // stride + 1
    return [
        x[:, :, i : i + stride * (h_out - 1) + 1 : stride, j : j + stride * (w_out - 1) + 1 : stride]
        for i in range(kernel)
        for j in range(kernel)
    ]


@dataclass(frozen=True)
class BilinearOp:
    """
    Beaver 곱에 쓰이는 쌍선형 연산 op(x, y).
    mul 은 원소곱, dense 는 x·yᵀ, conv2d 는 x 에 커널 y 를 적용한 합성곱입니다.
    """

    kind: Literal["mul", "dense", "conv2d"]
    stride: int = 1
    padding: int = 0
    dilation: int = 1

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.kind == "mul":
            return ring_mul(x, y)
        if self.kind == "dense":
            return ring_dense(x, y)
        return ring_conv2d(x, y, self.stride, self.padding, self.dilation)

    def output_shape(self, x_shape: tuple[int, ...], y_shape: tuple[int, ...]) -> tuple[int, ...]:
        if self.kind == "mul":
            if tuple(x_shape) != tuple(y_shape):
                raise ShapeMismatchError("ring mul", x_shape, y_shape)
            return tuple(x_shape)
        if self.kind == "dense":
            if len(x_shape) != 2 or x_shape[1] != y_shape[1]:
                raise ShapeMismatchError("ring dense", ("N", y_shape[1]), x_shape)
            return (x_shape[0], y_shape[0])
        if len(x_shape) != 4 or x_shape[1] != y_shape[1]:
            raise ShapeMismatchError("ring conv2d", ("N", y_shape[1], "H", "W"), x_shape)
        kernel = y_shape[2]
        return (
            x_shape[0],
            y_shape[0],
            conv_output_size(x_shape[2], kernel, self.stride, self.padding, self.dilation),
            conv_output_size(x_shape[3], kernel, self.stride, self.padding, self.dilation),
        )


MUL = BilinearOp("mul")
