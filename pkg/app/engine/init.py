# app/engine/init.py

import numpy as np


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """U[−√(1/fan_in), +√(1/fan_in)] 초기화."""
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape)


def conv_params(rng: np.random.Generator, out_ch: int, in_ch: int, kernel: int) -> dict[str, np.ndarray]:
    fan_in = in_ch * kernel * kernel
    return {
        "weight": init_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in),
        "bias": init_uniform(rng, (out_ch,), fan_in),
    }


def dense_params(rng: np.random.Generator, out_features: int, in_features: int) -> dict[str, np.ndarray]:
    return {
        "weight": init_uniform(rng, (out_features, in_features), in_features),
        "bias": init_uniform(rng, (out_features,), in_features),
    }
