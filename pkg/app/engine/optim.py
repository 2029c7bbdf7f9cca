# app/engine/optim.py

import logging

import numpy as np

from app.core.exceptions import NonFiniteError, ShapeMismatchError
from app.schemas.training import SgdConfig

logger = logging.getLogger(__name__)

ParamStore = dict[str, np.ndarray]


def sgd_step(
    params: ParamStore,
    grads: ParamStore,
    config: SgdConfig,
    velocity: ParamStore | None = None,
) -> tuple[ParamStore, ParamStore]:
    """
    모멘텀 SGD 한 스텝. 새 파라미터와 새 속도 상태를 돌려주며 입력은 변경하지 않습니다.
    v ← μ·v + g, p ← p − lr·v  (μ=0 이면 p ← p − lr·g)
    """
    velocity = velocity or {}
    for name, grad in grads.items():
        if name not in params:
            raise ShapeMismatchError(f"sgd_step (unknown parameter {name})", (), np.shape(grad))
        if np.shape(grad) != np.shape(params[name]):
            raise ShapeMismatchError(f"sgd_step parameter {name}", np.shape(params[name]), np.shape(grad))
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"gradient of parameter {name}")

    scale = 1.0
    if config.clip_norm is not None:
        norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
        if norm > config.clip_norm:
            scale = config.clip_norm / norm

    new_params: ParamStore = {}
    new_velocity: ParamStore = {}
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            new_params[name] = value
            if name in velocity:
                new_velocity[name] = velocity[name]
            continue
        grad = grad * scale if scale != 1.0 else grad
        if config.momentum:
            step = config.momentum * velocity.get(name, 0.0) + grad
            new_velocity[name] = step
        else:
            step = grad
        new_params[name] = value - config.learning_rate * step
    return new_params, new_velocity


class SGD:
    """속도 상태를 보관하는 SGD 옵티마이저."""

    def __init__(self, config: SgdConfig):
        self.config = config
        self.velocity: ParamStore = {}

    def step(self, params: ParamStore, grads: ParamStore) -> ParamStore:
        params, self.velocity = sgd_step(params, grads, self.config, self.velocity)
        return params
