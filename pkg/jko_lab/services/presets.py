"""
文件名: presets.py
描述: 命名的解析场、问题预设与初始密度预设。
主要功能:
    - FIELD_PRESETS: zero / one / cos2pix / sin2pix / cos2pix_cos2piy / weighted_v0 等解析场。
    - PROBLEM_PRESETS: heat / fokker-planck / weighted，各含 1 维与 2 维版本。
    - DENSITY_PRESETS: uniform / cos / sin / stationary / bump。
    - build_preset_problem: 由预设名直接构造 ProblemSpec。
依赖: numpy
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from ..errors import input_error
from .grid import Grid, GridFunction
from .functionals import MODE_MANUFACTURED, ProblemSpec, build_problem, stationary_density

TWO_PI = 2.0 * np.pi

FieldBuilder = Callable[[Grid], np.ndarray]

# ============================================
# region 解析场
# ============================================


def _phase(grid: Grid, axis: int) -> np.ndarray:
    return TWO_PI * grid.coordinates()[axis] / grid.period


def _zero(grid: Grid) -> np.ndarray:
    return np.zeros(grid.shape)


def _one(grid: Grid) -> np.ndarray:
    return np.ones(grid.shape)


def _cos2pix(grid: Grid) -> np.ndarray:
    return np.cos(_phase(grid, 0))


def _sin2pix(grid: Grid) -> np.ndarray:
    return np.sin(_phase(grid, 0))


def _cos2pix_cos2piy(grid: Grid) -> np.ndarray:
    if grid.dim == 1:
        return _cos2pix(grid)
    return np.cos(_phase(grid, 0)) * np.cos(_phase(grid, 1))


def _weighted_v0(grid: Grid) -> np.ndarray:
    if grid.dim == 1:
        return 1.0 + 0.5 * np.sin(_phase(grid, 0))
    return 1.0 + 0.5 * np.sin(_phase(grid, 0)) * np.sin(_phase(grid, 1))


def _exp_minus_cos(grid: Grid) -> np.ndarray:
    return np.exp(-_cos2pix_cos2piy(grid))


FIELD_PRESETS: Dict[str, FieldBuilder] = {
    "zero": _zero,
    "one": _one,
    "cos2pix": _cos2pix,
    "sin2pix": _sin2pix,
    "cos2pix_cos2piy": _cos2pix_cos2piy,
    "weighted_v0": _weighted_v0,
    "exp_minus_cos": _exp_minus_cos,
}


def preset_field(name: str, grid: Grid) -> GridFunction:
    """
    按名称构造解析场。

    参数:
        name: 预设名称。
        grid: 网格。
    返回:
        GridFunction。
    """
    builder = FIELD_PRESETS.get(name)
    if builder is None:
        raise input_error("PRESET_UNKNOWN", f"未知的场预设: {name}", field=name)
    return GridFunction(grid, builder(grid))


# endregion
# ============================================

# ============================================
# region 初始密度
# ============================================


def _density_cos(grid: Grid) -> np.ndarray:
    return 1.0 + 0.5 * _cos2pix_cos2piy(grid)


def _density_sin(grid: Grid) -> np.ndarray:
    return 1.0 + 0.5 * np.sin(_phase(grid, 0))


def _density_bump(grid: Grid) -> np.ndarray:
    """以 L/2 为中心、正下限 0.1 的平滑凸起。"""
    total = np.zeros(grid.shape)
    for axis in range(grid.dim):
        total = total + np.cos(_phase(grid, axis) - np.pi)
    return 0.1 + np.exp(2.0 * (total - grid.dim))


DENSITY_PRESETS: Dict[str, FieldBuilder] = {
    "uniform": _one,
    "cos": _density_cos,
    "sin": _density_sin,
    "bump": _density_bump,
}


def initial_values(name: str, grid: Grid) -> Optional[np.ndarray]:
    """
    初始密度预设的节点值；"stationary" 依赖问题本身，返回 None。

    参数:
        name: 预设名称。
        grid: 网格。
    返回:
        节点值数组或 None。
    """
    if name == "stationary":
        return None
    builder = DENSITY_PRESETS.get(name)
    if builder is None:
        raise input_error("PRESET_UNKNOWN", f"未知的初始密度预设: {name}", field=name)
    return builder(grid)


def list_density_presets() -> List[str]:
    return sorted(DENSITY_PRESETS) + ["stationary"]


# endregion
# ============================================

# ============================================
# region 问题预设
# ============================================


@dataclass(frozen=True)
class ProblemPreset:
    """问题预设：Ψ 与 v0 的场名（均为 manufactured 模式）。"""

    psi: str
    v0: str


PROBLEM_PRESETS: Dict[str, ProblemPreset] = {
    "heat": ProblemPreset(psi="zero", v0="one"),
    "fokker-planck": ProblemPreset(psi="cos2pix_cos2piy", v0="exp_minus_cos"),
    "weighted": ProblemPreset(psi="zero", v0="weighted_v0"),
}


def build_preset_problem(
    preset: str,
    grid: Grid,
    *,
    K: float,
    N: int,
    rho0: str = "cos",
) -> ProblemSpec:
    """
    由问题预设与初始密度预设构造 ProblemSpec。

    参数:
        preset: heat / fokker-planck / weighted。
        grid: 网格（1 维或 2 维）。
        K: 终止时间。
        N: 步数。
        rho0: 初始密度预设名。
    返回:
        ProblemSpec。
    """
    entry = PROBLEM_PRESETS.get(preset)
    if entry is None:
        raise input_error("PRESET_UNKNOWN", f"未知的问题预设: {preset}", field="preset")
    psi = preset_field(entry.psi, grid)
    v0 = preset_field(entry.v0, grid)
    values = initial_values(rho0, grid)
    placeholder = np.ones(grid.shape) if values is None else values
    spec = build_problem(grid, psi, placeholder, K, N, v0=v0, mode=MODE_MANUFACTURED, name=preset)
    if values is None:
        spec = spec.with_rho0(stationary_density(spec))
    return spec


def list_problem_presets() -> List[str]:
    return sorted(PROBLEM_PRESETS)


# endregion
# ============================================
