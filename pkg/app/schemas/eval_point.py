# app/schemas/eval_point.py

from functools import total_ordering

from pydantic import Field, model_validator

from app.core.exceptions import EvalPointError
from app.schemas.base_schema import BaseModel


def split_point(text) -> tuple[int, bool]:
    """N, N.0, N.5 표기를 (block, post_relu) 로 나눕니다. 설정 파일의 실수 3.0 도 3 으로 읽힙니다."""
    whole, dot, frac = str(text).strip().partition(".")
    if not whole.isdigit() or (dot and frac not in ("5", "0")):
        raise EvalPointError(f"cannot parse EvalPoint {text!r} (expected N or N.5)")
    block, post_relu = int(whole), frac == "5"
    if block == 0 and post_relu:
        raise EvalPointError(f"cannot parse EvalPoint {text!r} (input point has no .5 form)")
    return block, post_relu


@total_ordering
class EvalPoint(BaseModel):
    """
    활성값이 정의되는 위치. 정수 지점은 block 번째 선형 연산 직후, ".5" 지점은 그 블록의 ReLU 직후입니다.
    block=0 은 원본 입력(항등 prefix)이며 공격에서만 사용합니다.
    """

    block: int = Field(..., ge=0, description="선형 블록 번호 (1부터)")
    post_relu: bool = Field(False, description="ReLU 이후 지점 여부")

    @model_validator(mode="before")
    @classmethod
    def _from_text(cls, value):
        # 설정 파일과 CLI 에서는 "2.5" 같은 문자열로 씁니다
        if isinstance(value, (str, int, float)) and not isinstance(value, bool):
            block, post_relu = split_point(value)
            return {"block": block, "post_relu": post_relu}
        return value

    @model_validator(mode="after")
    def _check_input_point(self) -> "EvalPoint":
        if self.block == 0 and self.post_relu:
            raise ValueError("the input point has no ReLU")
        return self

    def render(self) -> str:
        return f"{self.block}.5" if self.post_relu else f"{self.block}"

    @classmethod
    def parse(cls, text: str) -> "EvalPoint":
        block, post_relu = split_point(text)
        return cls(block=block, post_relu=post_relu)

    def sort_key(self) -> tuple[int, bool]:
        return (self.block, self.post_relu)

    def __lt__(self, other: "EvalPoint") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return self.render()


INPUT_POINT = EvalPoint(block=0)
