# app/core/exceptions.py

import logging

import click

logger = logging.getLogger(__name__)


class C2PIError(Exception):
    """시뮬레이터의 모든 의도된 오류의 기반 클래스. detail 은 사용자에게 그대로 보여집니다."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(C2PIError):
    exit_code = 2


class ShapeMismatchError(C2PIError, ValueError):
    def __init__(self, where: str, expected, actual):
        super().__init__(f"shape mismatch in {where}: expected {tuple(expected)}, got {tuple(actual)}")
        self.where = where
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class NonFiniteError(C2PIError, ArithmeticError):
    def __init__(self, where: str):
        super().__init__(f"non-finite value in {where}")
        self.where = where


class DivergenceError(C2PIError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch


class FixedPointRangeError(C2PIError, OverflowError):
    pass


class TripleReuseError(C2PIError):
    pass


class DealerExhaustedError(C2PIError):
    def __init__(self, layer: str, slot: int):
        super().__init__(f"dealer store exhausted at slot {slot} (layer {layer})")
        self.layer = layer
        self.slot = slot


class ProtocolError(C2PIError):
    """프레이밍, 버전, 메시지 타입 위반."""


class ProtocolAbort(C2PIError):
    """세션 중단. phase 태그와 (있다면) 라운드 번호를 함께 전달합니다."""

    def __init__(self, phase: str, reason: str, round_index: int | None = None, remote: bool = False):
        where = f"[{phase}]" if round_index is None else f"[{phase} round {round_index}]"
        super().__init__(f"protocol aborted {where}: {reason}")
        self.phase = phase
        self.reason = reason
        self.round_index = round_index
        self.remote = remote


class ModelFormatError(C2PIError):
    exit_code = 3


class UnknownLayerKindError(ModelFormatError):
    def __init__(self, kind: str):
        super().__init__(f"unknown layer kind: {kind!r}")
        self.kind = kind


class DatasetFormatError(C2PIError):
    exit_code = 3


class EvalPointError(C2PIError, ValueError):
    pass


class EmptyInputError(C2PIError, ValueError):
    pass


class NoBoundaryError(C2PIError):
    pass


class CalibrationError(C2PIError):
    pass


def add_exception_handlers(group: click.Group) -> None:
    """
    CLI 그룹에 전역 예외 핸들러를 추가합니다.
    - 의도된 C2PIError 는 WARNING 으로 로깅하고 stderr 에 detail 을 출력합니다.
    - 처리되지 않은 예외는 ERROR 레벨로 트레이스백과 함께 로깅합니다.
    """
    original_invoke = group.invoke

    def invoke(ctx: click.Context):
        try:
            return original_invoke(ctx)
        except (click.exceptions.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except C2PIError as exc:
            logger.warning(
                f"C2PIError caught: {exc.__class__.__name__}, exit_code={exc.exit_code}, "
                f"detail='{exc.detail}', command={ctx.invoked_subcommand}"
            )
            click.echo(f"error: {exc.detail}", err=True)
            ctx.exit(exc.exit_code)
        except Exception as exc:
            logger.error(
                f"Unhandled exception caught: {exc.__class__.__name__}, command={ctx.invoked_subcommand}",
                exc_info=True,
            )
            click.echo(f"error: internal failure ({exc.__class__.__name__})", err=True)
            ctx.exit(1)

    group.invoke = invoke
