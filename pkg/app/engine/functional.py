# app/engine/functional.py
# 원시 연산의 순전파/역전파. 모든 연산은 record_op 를 통해 테이프에 기록됩니다.

from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.exceptions import ShapeMismatchError, UnknownLayerKindError
from app.engine.tensor import Tensor, record_op


def conv_output_size(size: int, kernel: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv_windows(x: np.ndarray, kernel: int, stride: int, padding: int, dilation: int) -> np.ndarray:
    """
    (N, C, H, W) 입력의 합성곱 윈도우 뷰 (N, C, Ho, Wo, k, k) 를 만듭니다.
    dtype 에 무관하므로 링(uint64) 연산도 같은 함수를 사용합니다.
    """
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    span = dilation * (kernel - 1) + 1
    windows = sliding_window_view(x, (span, span), axis=(2, 3))
    return windows[:, :, ::stride, ::stride, ::dilation, ::dilation]


def fold_windows(
    grad_windows: np.ndarray, padded_shape: tuple[int, ...], stride: int, dilation: int
) -> np.ndarray:
    """conv_windows 의 adjoint: 윈도우 기울기 (N, C, Ho, Wo, k, k) 를 입력 좌표로 누적합니다."""
    _, _, h_out, w_out, kernel, _ = grad_windows.shape
    out = np.zeros(padded_shape, dtype=grad_windows.dtype)
    for i in range(kernel):
        for j in range(kernel):
            hi, wj = i * dilation, j * dilation
            out[
                :,
                :,
                hi : hi + stride * (h_out - 1) + 1 : stride,
                wj : wj + stride * (w_out - 1) + 1 : stride,
            ] += grad_windows[:, :, :, :, i, j]
    return out


def _unpad(x: np.ndarray, padding: int) -> np.ndarray:
    if not padding:
        return x
    return x[:, :, padding:-padding, padding:-padding]


def _check_rank(where: str, x: Tensor, rank: int) -> None:
    if len(x.shape) != rank:
        raise ShapeMismatchError(where, ("rank", rank), x.shape)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    _check_rank("conv2d input", x, 4)
    _check_rank("conv2d weight", weight, 4)
    out_ch, in_ch, kernel, kernel_w = weight.shape
    if x.shape[1] != in_ch or kernel != kernel_w:
        raise ShapeMismatchError("conv2d", (x.shape[0], in_ch, *x.shape[2:]), x.shape)
    h_out = conv_output_size(x.shape[2], kernel, stride, padding, dilation)
    w_out = conv_output_size(x.shape[3], kernel, stride, padding, dilation)
    if h_out < 1 or w_out < 1:
        raise ShapeMismatchError("conv2d (output would be empty)", (h_out, w_out), x.shape)
    if bias is not None and bias.shape != (out_ch,):
        raise ShapeMismatchError("conv2d bias", (out_ch,), bias.shape)

    windows = conv_windows(x.data, kernel, stride, padding, dilation)
    out = np.tensordot(windows, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)
    padded_shape = (x.shape[0], in_ch, x.shape[2] + 2 * padding, x.shape[3] + 2 * padding)

    def backward(g: np.ndarray):
        grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_windows = np.tensordot(g, weight.data, axes=([1], [0])).transpose(0, 3, 1, 2, 4, 5)
        grad_x = _unpad(fold_windows(grad_windows, padded_shape, stride, dilation), padding)
        grad_b = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return grad_x, grad_w, grad_b

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record_op("conv2d", inputs, out, backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    _check_rank("dense input", x, 2)
    if weight.shape[1] != x.shape[1]:
        raise ShapeMismatchError("dense", (x.shape[0], weight.shape[1]), x.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeMismatchError("dense bias", (weight.shape[0],), bias.shape)
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g: np.ndarray):
        grad_b = g.sum(axis=0) if bias is not None else None
        return g @ weight.data, g.T @ x.data, grad_b

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record_op("dense", inputs, out, backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return record_op("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def _pool_windows(where: str, x: Tensor, kernel: int, stride: int) -> np.ndarray:
    _check_rank(where, x, 4)
    if x.shape[2] < kernel or x.shape[3] < kernel:
        raise ShapeMismatchError(f"{where} (window larger than input)", (kernel, kernel), x.shape[2:])
    return conv_windows(x.data, kernel, stride, 0, 1)


def maxpool2d(x: Tensor, kernel: int, stride: int | None = None) -> Tensor:
    stride = stride or kernel
    windows = _pool_windows("maxpool", x, kernel, stride)
    flat = windows.reshape(*windows.shape[:4], kernel * kernel)
    # argmax 는 동률일 때 첫 번째(행 우선) 위치를 고릅니다
    index = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, index[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray):
        grad_flat = np.zeros(flat.shape, dtype=np.float64)
        np.put_along_axis(grad_flat, index[..., None], g[..., None], axis=-1)
        grad_windows = grad_flat.reshape(windows.shape)
        return (fold_windows(grad_windows, x.shape, stride, 1),)

    return record_op("maxpool", (x,), out, backward)


def avgpool2d(x: Tensor, kernel: int, stride: int | None = None) -> Tensor:
    stride = stride or kernel
    windows = _pool_windows("avgpool", x, kernel, stride)
    out = windows.mean(axis=(-2, -1))

    def backward(g: np.ndarray):
        share = g[..., None, None] / (kernel * kernel)
        grad_windows = np.broadcast_to(share, windows.shape)
        return (fold_windows(np.ascontiguousarray(grad_windows), x.shape, stride, 1),)

    return record_op("avgpool", (x,), out, backward)


def flatten(x: Tensor) -> Tensor:
    shape = x.shape
    return record_op("flatten", (x,), x.data.reshape(shape[0], -1), lambda g: (g.reshape(shape),))


def reshape(x: Tensor, sample_shape: tuple[int, ...]) -> Tensor:
    """배치 차원은 유지하고 샘플 모양만 바꿉니다."""
    shape = x.shape
    target = (shape[0], *sample_shape)
    if int(np.prod(target)) != x.size:
        raise ShapeMismatchError("reshape", target, shape)
    return record_op("reshape", (x,), x.data.reshape(target), lambda g: (g.reshape(shape),))


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    _check_rank("upsample_nearest", x, 4)
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def backward(g: np.ndarray):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return record_op("upsample_nearest", (x,), out, backward)


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeMismatchError("add", x.shape, y.shape)
    return record_op("add", (x, y), x.data + y.data, lambda g: (g, g))


def sub(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeMismatchError("sub", x.shape, y.shape)
    return record_op("sub", (x, y), x.data - y.data, lambda g: (g, -g))


def mul_scalar(x: Tensor, scale: float) -> Tensor:
    return record_op("mul_scalar", (x,), x.data * scale, lambda g: (g * scale,))


def add_scalars(*terms: Tensor) -> Tensor:
    """스칼라 텐서들의 합."""
    total = sum(float(t.data.reshape(())) for t in terms)
    return record_op("add_scalars", terms, np.array(total), lambda g: tuple(g for _ in terms))


def sum_squares(x: Tensor) -> Tensor:
    """‖x‖²₂ (스칼라)."""
    return record_op("sum_squares", (x,), np.array(np.sum(x.data * x.data)), lambda g: (2.0 * g * x.data,))


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    if weights.shape != x.shape:
        raise ShapeMismatchError("weighted_sum", x.shape, weights.shape)
    return record_op("weighted_sum", (x,), np.array(np.sum(x.data * weights)), lambda g: (g * weights,))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """배치 평균 softmax 교차 엔트로피."""
    _check_rank("softmax_cross_entropy", logits, 2)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (logits.shape[0],):
        raise ShapeMismatchError("softmax_cross_entropy labels", (logits.shape[0],), labels.shape)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    batch = logits.shape[0]
    loss = -log_probs[np.arange(batch), labels].mean()

    def backward(g: np.ndarray):
        grad = np.exp(log_probs)
        grad[np.arange(batch), labels] -= 1.0
        return (g * grad / batch,)

    return record_op("softmax_cross_entropy", (logits,), np.array(loss), backward)


# --- 레이어 종류 레지스트리: forward(kind, params, x, **attrs) ---

def _conv_layer(x, params, stride=1, padding=0, dilation=1):
    return conv2d(x, params["weight"], params.get("bias"), stride, padding, dilation)


def _dense_layer(x, params):
    return dense(x, params["weight"], params.get("bias"))


LAYER_OPS: dict[str, Callable[..., Tensor]] = {
    "conv2d": _conv_layer,
    "dense": _dense_layer,
    "relu": lambda x, params: relu(x),
    "maxpool": lambda x, params, kernel=2, stride=None: maxpool2d(x, kernel, stride),
    "avgpool": lambda x, params, kernel=2, stride=None: avgpool2d(x, kernel, stride),
    "flatten": lambda x, params: flatten(x),
    "upsample_nearest": lambda x, params, factor=2: upsample_nearest(x, factor),
    "add": lambda x, params: add(x, params["other"]),
}


def forward(kind: str, params: dict[str, Tensor], x: Tensor, **attrs) -> Tensor:
    """레이어 종류 이름으로 원시 연산을 실행합니다."""
    try:
        op = LAYER_OPS[kind]
    except KeyError:
        raise UnknownLayerKindError(kind) from None
    return op(x, params, **attrs)
