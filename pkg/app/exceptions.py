from typing import Any, Optional

from app.constants import EXIT_CONFIG_ERROR, EXIT_NUMERIC_ERROR, EXIT_PARSE_ERROR


class AppException(Exception):
    """應用程式基礎例外"""

    def __init__(
        self,
        code: str,
        message: str,
        exit_code: int = EXIT_CONFIG_ERROR,
        details: Optional[Any] = None
    ):
        self.code = code
        self.message = message
        self.exit_code = exit_code
        self.details = details
        super().__init__(message)


class ValidationException(AppException):
    """參數或設定錯誤"""

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(
            code="VALIDATION_ERROR",
            message=message,
            exit_code=EXIT_CONFIG_ERROR,
            details=details
        )


class ParseException(AppException):
    """輸入檔案解析錯誤"""

    def __init__(self, message: str, row: Optional[int] = None, details: Optional[Any] = None):
        if row is not None:
            message = f"第 {row} 列: {message}"
        super().__init__(
            code="PARSE_ERROR",
            message=message,
            exit_code=EXIT_PARSE_ERROR,
            details=details
        )
        self.row = row


class NumericException(AppException):
    """執行期數值錯誤"""

    def __init__(self, message: str, details: Optional[Any] = None):
        super().__init__(
            code="NUMERIC_ERROR",
            message=message,
            exit_code=EXIT_NUMERIC_ERROR,
            details=details
        )


class ContractException(ValidationException):
    """呼叫前置條件不成立"""

    def __init__(self, message: str):
        super().__init__(message=message)
        self.code = "CONTRACT_ERROR"


class DimensionMismatchException(ContractException):
    """矩陣維度不一致"""

    def __init__(self, expected: int, actual: int):
        super().__init__(message=f"矩陣維度不一致: 預期 {expected}，實際 {actual}")
        self.code = "DIMENSION_MISMATCH"
        self.details = {"expected": expected, "actual": actual}


class NonFiniteInputException(NumericException):
    """輸入含 NaN 或 Inf"""

    def __init__(self, message: str = "輸入矩陣含有非有限數值 (NaN/Inf)。"):
        super().__init__(message=message)
        self.code = "NON_FINITE_INPUT"


class NotPositiveDefiniteException(NumericException):
    """矩陣非對稱正定"""

    def __init__(self, message: str = "矩陣不是對稱正定矩陣，Cholesky 分解失敗。"):
        super().__init__(message=message)
        self.code = "NOT_POSITIVE_DEFINITE"


class IllConditionedMatrixException(NumericException):
    """特徵值過小，無法取對數"""

    def __init__(self, min_eigenvalue: float, max_eigenvalue: float):
        super().__init__(
            message=f"矩陣條件數過大（最小特徵值 {min_eigenvalue:.3e}，最大特徵值 {max_eigenvalue:.3e}），請加大 jitter。",
            details={"min_eigenvalue": min_eigenvalue, "max_eigenvalue": max_eigenvalue},
        )
        self.code = "ILL_CONDITIONED"


class DegenerateWindowException(NumericException):
    """視窗相關矩陣無法正規化為 SPD"""

    def __init__(self, index: Optional[int], jitter: float):
        super().__init__(
            message=f"視窗 {index} 的相關矩陣在 jitter={jitter:.1e} 下仍非正定。",
            details={"window_index": index, "jitter": jitter},
        )
        self.code = "DEGENERATE_WINDOW"
        self.index = index


class NotReadyException(AppException):
    """歷史矩陣不足，尚不能計分"""

    def __init__(self, have: int, need: int):
        super().__init__(
            code="NOT_READY",
            message=f"歷史矩陣數量不足（{have}/{need}），尚無法計算偵測分數。",
            exit_code=EXIT_NUMERIC_ERROR,
        )


class ThresholdCalibrationException(ValidationException):
    """自動門檻的暖機分數不足"""

    def __init__(self, count: int, required: int = 5):
        super().__init__(
            message=f"暖機分數只有 {count} 筆（至少需要 {required} 筆），請改用 --threshold 明確指定 ρ。",
            details={"collected": count, "required": required},
        )
        self.code = "THRESHOLD_CALIBRATION"


class InvalidSeriesException(ValidationException):
    """時間序列資料不合法"""

    def __init__(self, message: str):
        super().__init__(message=message)
        self.code = "INVALID_SERIES"


class LabelMismatchException(ValidationException):
    """標籤與序列長度不符"""

    def __init__(self, message: str = "標籤超出序列長度範圍，請確認標籤檔與序列檔是否對應。"):
        super().__init__(message=message)
        self.code = "LABEL_MISMATCH"


class TraceMissingException(ValidationException):
    """事件檔中沒有 trace 紀錄"""

    def __init__(self, message: str = "事件檔中沒有 trace 紀錄，請以 detect --trace 重新執行。"):
        super().__init__(message=message)
        self.code = "TRACE_MISSING"


class OutputPathException(ValidationException):
    """輸出路徑無法寫入"""

    def __init__(self, path: str):
        super().__init__(message=f"無法寫入輸出路徑: {path}")
        self.code = "OUTPUT_NOT_WRITABLE"
