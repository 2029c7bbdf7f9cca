# app/schemas/experiment.py
# 실험 설정. 우선순위: CLI 옵션 > 설정 파일(평면 TOML) > C2PI_* 환경 변수 > 기본값

import json
from pathlib import Path
from typing import Literal

from pydantic import Field, ValidationError
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from app.core.exceptions import ConfigError
from app.core.provenance import derive_seed, resolve_seed
from app.schemas.attack import AttackConfig
from app.schemas.session import FixedCfg, InProcTransport, SessionConfig, SessionSeeds, TcpTransport
from app.schemas.training import SgdConfig, TrainingConfig

DEFAULT_LAMBDA_GRID = [round(0.05 * i, 2) for i in range(11)]


class ExperimentConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="C2PI_", extra="forbid", frozen=True)

    # 모델 / 데이터
    model: str = "toy_cnn"
    model_path: str | None = None
    dataset: Literal["synthetic", "cifar10", "cifar100"] = "synthetic"
    dataset_path: str | None = None
    test_path: str | None = None
    synthetic_classes: int = Field(3, ge=2)
    synthetic_size: int = Field(16, ge=8)
    synthetic_per_class: int = Field(200, ge=1)
    test_fraction: float = Field(0.2, gt=0, lt=1)

    # 시드. 지정하지 않은 시드는 seed (C2PI_SEED) 에서 파생됩니다
    seed: int | None = Field(None, ge=0)
    model_seed: int | None = Field(None, ge=0)
    data_seed: int | None = Field(None, ge=0)
    attack_seed: int | None = Field(None, ge=0)
    session_seed: int | None = Field(None, ge=0)

    # 임계값
    sigma: float = Field(0.3, gt=0, le=1)
    report_sigmas: list[float] = Field(default_factory=lambda: [0.2, 0.3])
    delta_drop: float = Field(0.025, ge=0, lt=1)
    noise_lambda: float = Field(0.1, ge=0)
    lambda_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    noise_at: Literal["output", "next"] = "output"
    accuracy_trials: int = Field(1, ge=1)

    # 공격
    attack_kind: Literal["mla", "eina", "dina"] = "dina"
    attack_iterations: int = Field(10000, gt=0)
    attack_lr: float = Field(0.001, gt=0)
    attack_epochs: int = Field(30, ge=0)
    attack_batch_size: int = Field(32, ge=1)
    attack_schedule: Literal["doubling", "uniform"] = "doubling"
    attack_train_samples: int | None = Field(None, ge=1)
    attack_eval_samples: int = Field(64, ge=1)
    parallel_precompute: bool = False

    # 학습
    epochs: int = Field(20, ge=0)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(0.05, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)

    # 프로토콜
    frac_bits: int = Field(16, ge=8, le=32)
    transport: Literal["in_proc", "tcp"] = "in_proc"
    host: str = "127.0.0.1"
    port: int = Field(0, ge=0, le=65535)
    dealer_port: int = Field(0, ge=0, le=65535)
    reveal_result: Literal["logits", "argmax"] = "logits"

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return (init_settings, TomlConfigSettingsSource(settings_cls), env_settings)

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides) -> "ExperimentConfig":
        """설정 파일(있다면)과 환경 변수, 명시적 값(None 이 아닌 것만)을 합칩니다."""
        overrides = {key: value for key, value in overrides.items() if value is not None}
        source = cls
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            source = type(
                cls.__name__, (cls,), {"model_config": SettingsConfigDict(**{**cls.model_config, "toml_file": path})}
            )
        try:
            loaded = source(**overrides)
            return cls.model_validate(loaded.model_dump())
        except ValidationError as e:
            raise ConfigError(f"invalid experiment config: {e.errors(include_url=False)}") from None
        except ValueError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from None

    def to_toml(self) -> str:
        """평면 TOML. None 인 항목은 쓰지 않습니다."""
        lines = []
        for name, value in self.model_dump().items():
            if value is None:
                continue
            lines.append(f"{name} = {_toml_value(value)}")
        return "\n".join(lines) + "\n"

    def seed_for(self, purpose: str) -> int:
        explicit = getattr(self, f"{purpose}_seed")
        if explicit is not None:
            return explicit
        return derive_seed(resolve_seed(self.seed, 0), purpose)

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(
            sgd=SgdConfig(learning_rate=self.learning_rate, momentum=self.momentum, seed=self.seed_for("model")),
            epochs=self.epochs,
            batch_size=self.batch_size,
        )

    def attack_config(self, kind: str | None = None, noise_lambda: float = 0.0) -> AttackConfig:
        return AttackConfig(
            kind=kind or self.attack_kind,
            iterations=self.attack_iterations,
            lr=self.attack_lr,
            epochs=self.attack_epochs,
            batch_size=self.attack_batch_size,
            schedule=self.attack_schedule,
            seed=self.seed_for("attack"),
            noise_lambda=noise_lambda,
            train_samples=self.attack_train_samples,
            eval_samples=self.attack_eval_samples,
        )

    def session_config(self, boundary, noise_lambda: float | None = None) -> SessionConfig:
        transport = (
            TcpTransport(host=self.host, port=self.port, dealer_port=self.dealer_port)
            if self.transport == "tcp"
            else InProcTransport()
        )
        return SessionConfig(
            boundary=boundary,
            noise_lambda=self.noise_lambda if noise_lambda is None else noise_lambda,
            fixed=FixedCfg(frac_bits=self.frac_bits),
            transport=transport,
            reveal_result=self.reveal_result,
            seeds=SessionSeeds(session=self.seed_for("session")),
        )


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    # JSON 문자열 이스케이프는 TOML 기본 문자열과 호환됩니다
    return json.dumps(str(value), ensure_ascii=False)
