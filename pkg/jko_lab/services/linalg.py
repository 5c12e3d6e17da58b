"""
文件名: linalg.py
描述: 周期（循环）三对角线性系统的直接解法。
主要功能:
    - solve_cyclic_tridiagonal: Sherman–Morrison 修正后调用 scipy.linalg.solve_banded。
    - apply_cyclic_tridiagonal: 对应的矩阵向量乘。
约定: 第 i 行为 lower[i]·x[i−1] + diag[i]·x[i] + upper[i]·x[i+1]，下标按周期取模。
依赖: numpy, scipy
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from ..errors import solver_error


def _banded(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """三对角矩阵的 (1,1) 带状存储。"""
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


def apply_cyclic_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, x: np.ndarray) -> np.ndarray:
    """循环三对角矩阵乘向量。"""
    return lower * np.roll(x, 1) + diag * x + upper * np.roll(x, -1)


def solve_cyclic_tridiagonal(
    lower: np.ndarray,
    diag: np.ndarray,
    upper: np.ndarray,
    rhs: np.ndarray,
) -> np.ndarray:
    """
    求解循环三对角系统。

    参数:
        lower: 下对角（lower[0] 为角点 A[0, n−1]）。
        diag: 主对角。
        upper: 上对角（upper[n−1] 为角点 A[n−1, 0]）。
        rhs: 右端项。
    返回:
        解向量。
    """
    n = len(diag)
    alpha = upper[-1]
    beta = lower[0]
    gamma = -diag[0] if diag[0] != 0 else -1.0
    modified = np.array(diag, dtype=float)
    modified[0] = diag[0] - gamma
    modified[-1] = diag[-1] - alpha * beta / gamma
    ab = _banded(lower, modified, upper)
    correction = np.zeros(n)
    correction[0] = gamma
    correction[-1] = alpha
    try:
        solved = solve_banded((1, 1), ab, np.column_stack([rhs, correction]))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise solver_error("TRIDIAGONAL_SINGULAR", f"循环三对角系统奇异: {exc}", field="linalg") from exc
    x = solved[:, 0]
    z = solved[:, 1]
    denominator = 1.0 + z[0] + beta * z[-1] / gamma
    if denominator == 0 or not np.isfinite(denominator):
        raise solver_error("TRIDIAGONAL_SINGULAR", "Sherman–Morrison 修正的分母为零", field="linalg")
    factor = (x[0] + beta * x[-1] / gamma) / denominator
    result = x - factor * z
    if not np.all(np.isfinite(result)):
        raise solver_error("TRIDIAGONAL_SINGULAR", "循环三对角求解结果非有限", field="linalg")
    return result
