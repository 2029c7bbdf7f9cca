# app/schemas/base_schema.py
# 모든 Pydantic 스키마의 기반이 되는 BaseModel 정의

from pydantic import BaseModel as PydanticBaseModel
from pydantic import ConfigDict, Field

from app.core.provenance import canonical_json


class BaseModel(PydanticBaseModel):
    # 스키마는 생성 후 변경하지 않습니다. 알 수 없는 필드는 거부합니다.
    model_config = ConfigDict(frozen=True, extra="forbid")


class ArtifactModel(BaseModel):
    """JSON 산출물의 공통 머리. schema 버전과 재현성 정보를 담습니다."""

    schema_version: int = 1
    provenance: dict[str, str | int | float | None] = Field(default_factory=dict)

    def to_artifact_json(self) -> str:
        """키 정렬 JSON. 같은 설정으로 다시 실행하면 바이트 단위로 같습니다."""
        payload = self.model_dump(mode="json")
        payload["schema"] = payload.pop("schema_version")
        return canonical_json(payload) + "\n"
