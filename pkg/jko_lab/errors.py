"""
文件名: errors.py
描述: 领域错误模型与结构化错误输出。
主要功能:
    - 提供 AppError 统一表达输入错误、求解失败与估计违例。
    - 构建命令行 stderr 输出的标准错误 payload。
    - 提供数值参数校验辅助函数。
依赖: 标准库
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

# ============================================
# region 退出码
# ============================================

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_SOLVER_FAILURE = 2
EXIT_ESTIMATE_VIOLATION = 3

# endregion
# ============================================

# ============================================
# region 错误模型
# ============================================


@dataclass(frozen=True)
class ErrorDetail:
    """
    字段级错误详情，用于定位出错的配置键、节点或步骤。
    """

    field: str
    code: str
    message: str


class AppError(Exception):
    """
    领域异常，命令行层据此映射退出码。
    """

    def __init__(
        self,
        exit_code: int,
        code: str,
        message: str,
        details: Optional[Iterable[ErrorDetail]] = None,
    ) -> None:
        """
        创建应用错误实例。

        参数:
            exit_code: 进程退出码（1 输入错误，2 求解失败，3 估计违例）。
            code: 错误码字符串。
            message: 可读错误信息。
            details: 字段级错误列表（可选）。
        """
        super().__init__(message)
        self.exit_code = exit_code
        self.code = code
        self.message = message
        self.details = list(details or [])

    def as_detail(self, field: str) -> ErrorDetail:
        """
        将异常折叠为单条 ErrorDetail（轨迹失败记录使用）。

        参数:
            field: 出错位置描述，例如 step[3]。
        返回:
            ErrorDetail 实例。
        """
        return ErrorDetail(field=field, code=self.code, message=self.message)


def input_error(code: str, message: str, *, field: str = "") -> AppError:
    """
    构建输入错误（退出码 1）。

    参数:
        code: 错误码。
        message: 可读错误信息。
        field: 相关字段名（可选）。
    返回:
        AppError 实例。
    """
    details = [ErrorDetail(field=field, code=code, message=message)] if field else None
    return AppError(exit_code=EXIT_INPUT_ERROR, code=code, message=message, details=details)


def solver_error(code: str, message: str, *, field: str = "") -> AppError:
    """
    构建求解失败错误（退出码 2）。

    参数:
        code: 错误码。
        message: 可读错误信息。
        field: 相关字段名（可选）。
    返回:
        AppError 实例。
    """
    details = [ErrorDetail(field=field, code=code, message=message)] if field else None
    return AppError(exit_code=EXIT_SOLVER_FAILURE, code=code, message=message, details=details)


# endregion
# ============================================

# ============================================
# region 错误输出
# ============================================


def build_error_payload(
    *,
    code: str,
    message: str,
    details: Optional[Iterable[ErrorDetail]] = None,
) -> dict:
    """
    构建标准错误 payload。

    参数:
        code: 错误码字符串。
        message: 可读错误信息。
        details: 字段级错误列表（可选）。
    返回:
        错误字典。
    """
    return {
        "error": {
            "code": code,
            "message": message,
            "details": [
                {"field": d.field, "code": d.code, "message": d.message}
                for d in (details or [])
            ],
        }
    }


# endregion
# ============================================

# ============================================
# region 参数校验
# ============================================


def ensure_positive(value: float, *, field: str, code: str = "VALUE_NOT_POSITIVE") -> None:
    """
    校验数值为有限正数。

    参数:
        value: 待校验数值。
        field: 错误详情字段名。
        code: 校验失败时的错误码。
    """
    if not math.isfinite(value) or value <= 0:
        raise input_error(code, f"{field} 必须为有限正数，实际为 {value!r}", field=field)


def ensure_finite(value: float, *, field: str, code: str = "VALUE_NOT_FINITE") -> None:
    """校验数值为有限实数。"""
    if not math.isfinite(value):
        raise input_error(code, f"{field} 必须为有限值，实际为 {value!r}", field=field)


def ensure_in_range(
    value: float,
    *,
    low: float,
    high: float,
    field: str,
    code: str = "VALUE_OUT_OF_RANGE",
) -> None:
    """
    校验数值位于闭区间 [low, high] 内。

    参数:
        value: 待校验数值。
        low: 下界。
        high: 上界。
        field: 错误详情字段名。
        code: 校验失败时的错误码。
    """
    if not math.isfinite(value) or value < low or value > high:
        raise input_error(code, f"{field} 必须位于 [{low}, {high}] 内，实际为 {value!r}", field=field)


# endregion
# ============================================
