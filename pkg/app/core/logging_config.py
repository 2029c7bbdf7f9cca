# app/core/logging_config.py

import logging
import os
import sys
from logging.handlers import RotatingFileHandler

from app.core.config import settings


def setup_logging(
    level: str | None = None,
    log_dir: str | None = None,
    to_file: bool | None = None,
) -> None:
    """
    시뮬레이터의 로깅 시스템을 설정합니다.
    - 로그 레벨: settings.LOG_LEVEL (인자로 덮어쓰기 가능)
    - 포맷: [시간] - [로거 이름] - [로그 레벨] - [모듈:함수:줄] - [메시지]
    - 핸들러: 콘솔(stderr) 및 선택적 파일(rotating) 핸들러
    stdout 은 명령 출력용으로 비워 둡니다.
    """
    level = level or settings.LOG_LEVEL
    log_dir = log_dir or settings.LOG_DIR
    to_file = settings.LOG_TO_FILE if to_file is None else to_file

    log_formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(module)s:%(funcName)s:%(lineno)d - %(message)s"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(level.upper())

    # 루트 로거에 핸들러 추가 (중복 추가 방지)
    if root_logger.handlers:
        return

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(log_formatter)
    root_logger.addHandler(console_handler)

    if to_file:
        os.makedirs(log_dir, exist_ok=True)
        # 5MB 초과 시 새 파일, 최대 5개 유지
        file_handler = RotatingFileHandler(
            os.path.join(log_dir, "c2pi.log"),
            maxBytes=5 * 1024 * 1024,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setFormatter(log_formatter)
        root_logger.addHandler(file_handler)
        logging.info(f"✅ Logging configured. Logs go to stderr and {log_dir}/c2pi.log")
    else:
        logging.debug("✅ Logging configured. Logs go to stderr")
