# app/models/__init__.py
# 모델 클래스들을 이 파일에서 임포트하여 외부에서 쉽게 접근할 수 있도록 합니다.

from .dataset import Dataset
from .inversion import InversionNetwork
from .network import TrainedModel, eval_points, point_extents, prefix_cut
from .zoo import build_spec, init_weights

__all__ = [
    "Dataset",
    "TrainedModel",
    "eval_points",
    "point_extents",
    "prefix_cut",
    "InversionNetwork",
    "build_spec",
    "init_weights",
]
