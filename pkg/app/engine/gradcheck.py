# app/engine/gradcheck.py

from typing import Callable

import numpy as np

from app.engine.functional import LAYER_OPS, weighted_sum
from app.engine.tensor import Tape, Tensor

LayerFn = Callable[..., Tensor]


def _resolve(op: str | LayerFn) -> LayerFn:
    return LAYER_OPS[op] if isinstance(op, str) else op


def grad_check(
    op: str | LayerFn,
    params: dict[str, np.ndarray],
    x: np.ndarray,
    tolerance: float = 1e-4,
    seed: int = 0,
    step: float = 1e-5,
    **attrs,
) -> bool:
    """
    해석적 기울기와 중앙 차분 기울기를 입력과 모든 파라미터 원소에 대해 비교합니다.
    스칼라 목적함수는 출력과 고정 난수 투영의 내적입니다.
    오차 = |a − n| / max(1, |a|, |n|)
    """
    layer = _resolve(op)
    x = np.asarray(x, dtype=np.float64)
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    rng = np.random.default_rng(seed)

    with Tape() as tape:
        x_t = Tensor(x, name="input")
        param_t = {k: Tensor(v, name=k) for k, v in params.items()}
        out = layer(x_t, param_t, **attrs)
        projection = rng.standard_normal(out.shape)
        loss = weighted_sum(out, projection)
    analytic = tape.backward(loss, wrt=[x_t, *param_t.values()])

    def objective(x_value: np.ndarray, param_values: dict[str, np.ndarray]) -> float:
        result = layer(Tensor(x_value), {k: Tensor(v) for k, v in param_values.items()}, **attrs)
        return float(np.sum(result.data * projection))

    targets: list[tuple[str | None, np.ndarray, np.ndarray]] = [(None, x, analytic[x_t])]
    targets += [(k, params[k], analytic[param_t[k]]) for k in params]

    for name, base, grad in targets:
        for index in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[index] += step
            minus[index] -= step
            if name is None:
                f_plus = objective(plus, params)
                f_minus = objective(minus, params)
            else:
                f_plus = objective(x, {**params, name: plus})
                f_minus = objective(x, {**params, name: minus})
            numeric = (f_plus - f_minus) / (2 * step)
            a = float(grad[index])
            error = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if error > tolerance:
                return False
    return True
