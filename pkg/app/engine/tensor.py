# app/engine/tensor.py
# 64-bit 실수 텐서와 역전파 테이프

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from app.core.exceptions import ShapeMismatchError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass(frozen=True, eq=False)
class Tensor:
    """
    불변 float64 텐서. 동일성(identity)으로 해시되므로 기울기 딕셔너리의 키로 사용됩니다.
    배치 차원이 있다면 항상 맨 앞에 둡니다.
    """

    data: np.ndarray
    name: str | None = None

    def __post_init__(self):
        array = np.array(self.data, dtype=np.float64, copy=True)
        array.flags.writeable = False
        object.__setattr__(self, "data", array)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}>"


@dataclass
class TapeEntry:
    index: int
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


_local = threading.local()


def _stack() -> list["Tape"]:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


@dataclass
class Tape:
    """
    실행된 원시 연산을 순서대로 기록합니다.
    backward 는 기록의 역순으로 각 항목을 정확히 한 번씩 방문합니다.
    스레드마다 독립적인 활성 테이프 스택을 가집니다.
    """

    entries: list[TapeEntry] = field(default_factory=list)
    replayed: list[int] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        self.entries.append(TapeEntry(len(self.entries), op, inputs, output, backward))

    def backward(self, loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
        if loss.size != 1:
            raise ShapeMismatchError("Tape.backward (loss must be scalar)", (), loss.shape)
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        tensors: dict[int, Tensor] = {id(loss): loss}
        self.replayed = []
        for entry in reversed(self.entries):
            self.replayed.append(entry.index)
            upstream = grads.get(id(entry.output))
            if upstream is None:
                continue
            for tensor, grad in zip(entry.inputs, entry.backward(upstream)):
                if grad is None:
                    continue
                key = id(tensor)
                tensors[key] = tensor
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = grad
        if wrt is None:
            return {tensors[key]: grad for key, grad in grads.items()}
        return {t: grads.get(id(t), np.zeros_like(t.data)) for t in wrt}


def active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def record_op(op: str, inputs: Sequence[Tensor], output: np.ndarray, backward: BackwardFn) -> Tensor:
    """연산 결과를 Tensor 로 감싸고, 활성 테이프가 있으면 역전파 함수와 함께 기록합니다."""
    result = Tensor(output)
    tape = active_tape()
    if tape is not None:
        tape.record(op, tuple(inputs), result, backward)
    return result
