import logging
from typing import Any, Callable, Dict, Tuple, Type, Union

import click
import numpy as np
from pydantic import ValidationError

from app.constants import EXIT_CONFIG_ERROR, EXIT_NUMERIC_ERROR
from app.exceptions import AppException
from app.models.error import ErrorInfo, ErrorResponse, validation_details

logger = logging.getLogger(__name__)

EXIT_INTERNAL_ERROR = 1

# handler 回傳 (錯誤回應, 結束代碼)
Handler = Callable[[Exception], Tuple[ErrorResponse, int]]


def create_error_response(
    code: str,
    message: str,
    details: Union[dict, list, None] = None
) -> ErrorResponse:
    """建立統一的錯誤回應格式"""
    return ErrorResponse(error=ErrorInfo(code=code, message=message, details=details or None))


def emit_error(response: ErrorResponse) -> None:
    """錯誤回應寫到 stderr（stdout 保留給 NDJSON）"""
    click.echo(response.model_dump_json(exclude_none=True), err=True)


class ExceptionHandlers:
    """依例外型別（沿 MRO 尋找）對應到錯誤回應與結束代碼"""

    def __init__(self):
        self._handlers: Dict[Type[BaseException], Handler] = {}

    def register(self, exc_type: Type[BaseException]) -> Callable[[Handler], Handler]:
        def decorator(func: Handler) -> Handler:
            self._handlers[exc_type] = func
            return func
        return decorator

    def resolve(self, exc: BaseException) -> Handler:
        for cls in type(exc).__mro__:
            if cls in self._handlers:
                return self._handlers[cls]
        raise exc

    def handle(self, exc: Exception) -> int:
        response, exit_code = self.resolve(exc)(exc)
        emit_error(response)
        return exit_code


def register_exception_handlers(handlers: ExceptionHandlers) -> None:
    """註冊全域例外處理器"""

    @handlers.register(AppException)
    def app_exception_handler(exc: AppException):
        """處理應用程式自定義例外"""
        logger.warning(f"AppException: {exc.code} - {exc.message}")
        return create_error_response(code=exc.code, message=exc.message, details=exc.details), exc.exit_code

    @handlers.register(ValidationError)
    def pydantic_validation_handler(exc: ValidationError):
        """處理 Pydantic 驗證錯誤"""
        errors = [detail.model_dump() for detail in validation_details(exc.errors())]
        logger.warning(f"Validation error: {len(errors)} field(s)")
        return create_error_response(
            code="VALIDATION_ERROR",
            message="參數驗證失敗",
            details=errors
        ), EXIT_CONFIG_ERROR

    @handlers.register(ValueError)
    def value_error_handler(exc: ValueError):
        """處理值錯誤"""
        logger.error(f"ValueError: {exc}", exc_info=True)
        return create_error_response(code="VALUE_ERROR", message=str(exc)), EXIT_CONFIG_ERROR

    @handlers.register(np.linalg.LinAlgError)
    @handlers.register(FloatingPointError)
    def numeric_error_handler(exc: Exception):
        """處理未包裝的線性代數 / 浮點錯誤"""
        logger.error(f"Numeric failure: {exc}", exc_info=True)
        return create_error_response(code="NUMERIC_ERROR", message=f"數值計算失敗: {exc}"), EXIT_NUMERIC_ERROR

    @handlers.register(Exception)
    def general_exception_handler(exc: Exception):
        """處理未預期的例外"""
        logger.error(f"Unexpected error: {exc}", exc_info=True)
        return create_error_response(
            code="INTERNAL_ERROR",
            message="系統發生未預期的錯誤"
        ), EXIT_INTERNAL_ERROR


class HandledGroup(click.Group):
    """把子命令拋出的例外交給 ExceptionHandlers，轉成錯誤回應與結束代碼"""

    def __init__(self, *args: Any, **kwargs: Any):
        super().__init__(*args, **kwargs)
        self.exception_handlers = ExceptionHandlers()

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.exceptions.Abort, click.ClickException):
            raise
        except Exception as exc:
            ctx.exit(self.exception_handlers.handle(exc))
