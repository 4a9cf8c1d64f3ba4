"""예외 → 프로세스 종료 코드 매핑 (CLI 예외 핸들러)"""
from typing import Dict, Type

from src.utils import (
    AppException, CheckpointError, ConfigError, DatasetError, LossInputError, MetricError,
    ModelSpecError, TrainingDivergedError, TransferError
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_APP_ERROR = 1
EXIT_UNEXPECTED = 70

# 하위 클래스는 부모 항목으로 분류된다 (예: SynthesisError → DatasetError)
EXIT_CODES: Dict[Type[AppException], int] = {
    ConfigError: 2,
    DatasetError: 3,
    ModelSpecError: 4,
    TransferError: 4,
    TrainingDivergedError: 5,
    LossInputError: 5,
    CheckpointError: 6,
    MetricError: 7,
}


def exit_code_for(exc: BaseException) -> int:
    """예외에 해당하는 종료 코드"""
    if not isinstance(exc, AppException):
        return EXIT_UNEXPECTED
    for exc_type, code in EXIT_CODES.items():
        if isinstance(exc, exc_type):
            return code
    return EXIT_APP_ERROR


def app_exception_handler(exc: AppException) -> int:
    logger.error(f"{exc.__class__.__name__}: {str(exc) or '실행 오류'}")
    return exit_code_for(exc)


def unexpected_exception_handler(exc: BaseException) -> int:
    logger.exception(f"예상하지 못한 오류: {exc}")
    return EXIT_UNEXPECTED


def handle_exception(exc: BaseException) -> int:
    """예외를 로그로 남기고 종료 코드를 반환"""
    if isinstance(exc, AppException):
        return app_exception_handler(exc)
    return unexpected_exception_handler(exc)
