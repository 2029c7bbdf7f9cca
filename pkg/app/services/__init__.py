# app/services/__init__.py
# 서비스 클래스들을 이 파일에서 임포트합니다.

from .attack_service import AttackService
from .boundary_service import BoundaryService
from .dataset_service import DatasetService
from .pipeline_service import PipelineService

__all__ = [
    "AttackService",
    "BoundaryService",
    "DatasetService",
    "PipelineService",
]
