from typing import Any, List, Optional
from pydantic import BaseModel, ConfigDict


class ErrorDetail(BaseModel):
    """錯誤詳情"""
    field: str
    message: str
    type: str


class ErrorInfo(BaseModel):
    """錯誤資訊"""
    code: str
    message: str
    details: Optional[Any] = None


class ErrorResponse(BaseModel):
    """錯誤回應（輸出到 stderr）"""
    status: str = "error"
    error: ErrorInfo

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "status": "error",
                "error": {
                    "code": "PARSE_ERROR",
                    "message": "第 12 列: 欄位數不一致（預期 3，實際 4）",
                    "details": {"row": 12},
                }
            }
        }
    )


def validation_details(errors: List[dict]) -> List[ErrorDetail]:
    """把 pydantic 驗證錯誤攤平成 ErrorDetail"""
    return [
        ErrorDetail(
            field=" -> ".join(str(loc) for loc in error["loc"]),
            message=error["msg"],
            type=error["type"],
        )
        for error in errors
    ]
