# app/crud/__init__.py
# 파일 입출력 함수들을 이 패키지에서 임포트하여 서비스 계층에서 쉽게 접근할 수 있도록 합니다.

from . import crud_artifact, crud_dataset, crud_model

__all__ = ["crud_artifact", "crud_dataset", "crud_model"]
