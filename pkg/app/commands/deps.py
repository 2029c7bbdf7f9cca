# app/commands/deps.py
# 명령들이 공통으로 쓰는 옵션과 의존성 (설정 로드, 파이프라인, EvalPoint 파싱)

import functools
import logging
from pathlib import Path

import click

from app.core.exceptions import EvalPointError
from app.schemas.eval_point import EvalPoint
from app.schemas.experiment import ExperimentConfig
from app.services.pipeline_service import PipelineService

logger = logging.getLogger(__name__)


def common_options(func):
    """--config / --seed / --out"""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="평면 TOML 설정 파일")
    @click.option("--seed", type=click.IntRange(min=0), default=None, help="전역 시드 (C2PI_SEED 보다 우선)")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default="artifacts", show_default=True)
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def model_option(func):
    return click.option("--model", "model_path", type=click.Path(dir_okay=False), default=None, help=".c2m 모델 파일")(
        func
    )


def parse_point(ctx: click.Context, param: click.Parameter, value):
    """click 콜백: "2.5" → EvalPoint. multiple 옵션이면 튜플을 돌려줍니다."""
    if value is None:
        return None
    try:
        if isinstance(value, tuple):
            return tuple(EvalPoint.parse(v) for v in value)
        return EvalPoint.parse(value)
    except EvalPointError as e:
        raise click.BadParameter(e.detail) from None


def load_config(config_path: str | None, **overrides) -> ExperimentConfig:
    logger.info(f"🚀 Command {click.get_current_context().info_name} starting")
    config = ExperimentConfig.load(config_path, **overrides)
    log_settings(config)
    return config


def log_settings(config: ExperimentConfig) -> None:
    logger.info("--- Experiment Settings ---")
    logger.info(f"Model: {config.model} (file: {config.model_path})")
    logger.info(f"Dataset: {config.dataset} (path: {config.dataset_path})")
    logger.info(f"Seed: {config.seed}, σ={config.sigma}, δ-drop={config.delta_drop}, λ={config.noise_lambda}")
    logger.info(f"Attack: {config.attack_kind}, transport: {config.transport}, f={config.frac_bits}")
    logger.info("---------------------------")


def get_pipeline(config: ExperimentConfig) -> PipelineService:
    return PipelineService(config)


def out_path(out_dir: str, name: str) -> Path:
    return Path(out_dir) / name
