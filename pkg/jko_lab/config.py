"""
文件名: config.py
描述: JKO 求解与验证工具的配置加载模块。
主要功能:
    - 加载并规范化 JKO_ 前缀环境变量。
    - 提供可缓存的 Settings 对象，供各求解服务共享数值容差。
依赖: python-dotenv
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv

# ============================================
# region 环境变量辅助
# ============================================

def _get_int_env(name: str, default: int) -> int:
    """
    读取整数类型环境变量，失败时使用默认值。

    参数:
        name: 环境变量名。
        default: 缺失或非法时的默认值。
    返回:
        解析后的整数值。
    """
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        return default

def _get_str_env(name: str, default: str) -> str:
    """
    读取字符串类型环境变量，失败时使用默认值。

    参数:
        name: 环境变量名。
        default: 缺失时的默认值。
    返回:
        环境变量字符串值。
    """
    value = os.getenv(name)
    if value is None or value == "":
        return default
    return value

def _get_float_env(name: str, default: float) -> float:
    """
    读取浮点类型环境变量，失败时使用默认值。
    参数:
        name: 环境变量名。
        default: 缺失或非法时的默认值。
    返回:
        解析后的浮点值。
    """
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError:
        return default

def _get_bool_env(name: str, default: bool) -> bool:
    """
    读取布尔类型环境变量（1/true/yes/on 为真）。

    参数:
        name: 环境变量名。
        default: 缺失或非法时的默认值。
    返回:
        解析后的布尔值。
    """
    value = os.getenv(name)
    if value is None or value == "":
        return default
    normalized = value.strip().lower()
    if normalized in {"1", "true", "yes", "on"}:
        return True
    if normalized in {"0", "false", "no", "off"}:
        return False
    return default


# endregion
# ============================================

# ============================================
# region 配置模型
# ============================================
@dataclass(frozen=True)
class Settings:
    """
    数值求解所需的不可变配置项。
    """

    log_level: str
    deterministic: bool
    lp_max_nodes: int
    mass_tol: float
    marginal_tol: float
    density_floor: float
    sinkhorn_eps_factor: float
    sinkhorn_tol: float
    sinkhorn_max_iter: int
    sinkhorn_annealing: bool
    newton_tol: float
    newton_max_iter: int
    jko_max_outer: int
    jko_damping: float
    jko_inner_tol: float
    consistency_tol: float
    eigen_tol: float
    eigen_max_iter: int
    pde_tol: float
    estimate_rel_slack: float
    estimate_allowance: float
    c_floor: float


@lru_cache
def get_settings() -> Settings:
    """
    从环境变量加载配置并缓存结果。

    返回:
        Settings 实例。
    """
    load_dotenv()
    return Settings(
        log_level=_get_str_env("JKO_LOG_LEVEL", "INFO"),
        deterministic=_get_bool_env("JKO_DETERMINISTIC", True),
        lp_max_nodes=_get_int_env("JKO_LP_MAX_NODES", 4096),
        mass_tol=_get_float_env("JKO_MASS_TOL", 1e-12),
        marginal_tol=_get_float_env("JKO_MARGINAL_TOL", 1e-9),
        density_floor=_get_float_env("JKO_DENSITY_FLOOR", 1e-12),
        sinkhorn_eps_factor=_get_float_env("JKO_SINKHORN_EPS_FACTOR", 1e-3),
        sinkhorn_tol=_get_float_env("JKO_SINKHORN_TOL", 1e-9),
        sinkhorn_max_iter=_get_int_env("JKO_SINKHORN_MAX_ITER", 100000),
        sinkhorn_annealing=_get_bool_env("JKO_SINKHORN_ANNEALING", False),
        newton_tol=_get_float_env("JKO_NEWTON_TOL", 1e-11),
        newton_max_iter=_get_int_env("JKO_NEWTON_MAX_ITER", 60),
        jko_max_outer=_get_int_env("JKO_JKO_MAX_OUTER", 500),
        jko_damping=_get_float_env("JKO_JKO_DAMPING", 0.5),
        jko_inner_tol=_get_float_env("JKO_JKO_INNER_TOL", 1e-7),
        consistency_tol=_get_float_env("JKO_CONSISTENCY_TOL", 1e-6),
        eigen_tol=_get_float_env("JKO_EIGEN_TOL", 1e-8),
        eigen_max_iter=_get_int_env("JKO_EIGEN_MAX_ITER", 500),
        pde_tol=_get_float_env("JKO_PDE_TOL", 1e-10),
        estimate_rel_slack=_get_float_env("JKO_ESTIMATE_REL_SLACK", 1e-9),
        estimate_allowance=_get_float_env("JKO_ESTIMATE_ALLOWANCE", 100.0),
        c_floor=_get_float_env("JKO_C_FLOOR", 1.0),
    )


# endregion
# ============================================
