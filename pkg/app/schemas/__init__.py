# app/schemas/__init__.py
# Pydantic 스키마 클래스들을 이 파일에서 임포트하여 외부에서 쉽게 접근할 수 있도록 합니다.

from .attack import AttackConfig, AttackReport, InverseBlockSpec, InversionModelSpec, SubBlock
from .base_schema import ArtifactModel, BaseModel
from .boundary import (
    AccuracyTraceEntry,
    BoundaryResult,
    CostSummary,
    ExperimentReport,
    NoiseSweepRow,
    ReportRow,
    SsimTraceEntry,
)
from .eval_point import INPUT_POINT, EvalPoint
from .metrics import SsimConfig
from .model_spec import CryptoArch, ModelSpec
from .session import FixedCfg, InProcTransport, SessionConfig, SessionSeeds, TcpTransport
from .training import SgdConfig, TrainingConfig, TrainingMeta
from .transcript import LedgerEntry, PhaseTotals, Transcript

__all__ = [
    "BaseModel",
    "ArtifactModel",
    "EvalPoint",
    "INPUT_POINT",
    "ModelSpec",
    "CryptoArch",
    "SgdConfig",
    "TrainingConfig",
    "TrainingMeta",
    "FixedCfg",
    "InProcTransport",
    "TcpTransport",
    "SessionSeeds",
    "SessionConfig",
    "LedgerEntry",
    "PhaseTotals",
    "Transcript",
    "SsimConfig",
    "AttackConfig",
    "AttackReport",
    "SubBlock",
    "InverseBlockSpec",
    "InversionModelSpec",
    "SsimTraceEntry",
    "AccuracyTraceEntry",
    "BoundaryResult",
    "CostSummary",
    "ReportRow",
    "ExperimentReport",
    "NoiseSweepRow",
]
