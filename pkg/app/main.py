# app/main.py

import logging

import click

from app.commands.cli import commands
from app.core.config import settings
from app.core.exceptions import add_exception_handlers
from app.core.logging_config import setup_logging


@click.group(
    name="c2pi",
    help="crypto-clear 분할 private inference 시뮬레이터 (학습, 공격, 경계 탐색, PI 세션).",
)
@click.version_option(settings.VERSION, prog_name=settings.PROJECT_NAME)
@click.option("--log-level", default=None, help="settings.LOG_LEVEL 덮어쓰기")
@click.option("--log-file/--no-log-file", default=None, help="logs/c2pi.log 회전 파일 로그")
def cli(log_level: str | None, log_file: bool | None) -> None:
    # 로깅 설정 (가장 먼저 호출)
    setup_logging(level=log_level, to_file=log_file)
    logger = logging.getLogger(__name__)

    logger.info(f"--- {settings.PROJECT_NAME} starting in [{settings.APP_ENV}] mode ---")
    logger.info("--- Application Settings ---")
    logger.info(f"Cache Dir: {settings.CACHE_DIR}")
    logger.info(f"Protocol Timeout: {settings.PROTOCOL_TIMEOUT_S}s, Workers: {settings.PARALLEL_WORKERS}")
    logger.info(f"Global Seed (C2PI_SEED): {settings.C2PI_SEED}")
    logger.info("--------------------------")


# 명령 등록
for command in commands:
    cli.add_command(command)

# --- 예외 핸들러 등록 ---
add_exception_handlers(cli)


def main() -> None:
    cli(prog_name="c2pi")


if __name__ == "__main__":
    main()
