# app/core/config.py
import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

APP_ENV = os.getenv("APP_ENV", "dev")
env_file_path = f".env.{APP_ENV}"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=env_file_path if os.path.exists(env_file_path) else None,
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application Settings
    APP_ENV: str = "dev"
    PROJECT_NAME: str = "c2pi-sim"
    VERSION: str = "0.1.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_TO_FILE: bool = False

    # 산출물 / 캐시
    CACHE_DIR: str = ".c2pi_cache"
    ARTIFACT_SCHEMA_VERSION: int = 1

    # 프로토콜
    PROTOCOL_TIMEOUT_S: float = Field(default=120.0, gt=0)
    MAX_PAYLOAD_BYTES: int = 2**31

    # 지점별 공격 병렬 실행 스레드 수
    PARALLEL_WORKERS: int = Field(default=4, ge=1)

    # CIFAR-100 로더는 데스크 스케일에서 기본 비활성화
    ALLOW_CIFAR100: bool = False

    # 전역 시드 fallback (명시적 시드가 없을 때만 사용)
    C2PI_SEED: int | None = Field(default=None, ge=0)


settings = Settings()
