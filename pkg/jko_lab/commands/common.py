"""
文件名: common.py
描述: 子命令共用的配置解析、问题构造与输出目录处理。
主要功能:
    - apply_overrides: 把配置文件中的容差覆盖写入 JKO_* 环境变量并刷新 Settings。
    - resolve_field / build_spec: 由 RunConfig 构造 ProblemSpec。
    - prepare_output / finish_output: 输出目录校验与 metrics.prom 写出。
依赖: numpy
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..config import get_settings
from ..errors import input_error
from ..schemas.config import RunConfig
from ..services.field_io import atomic_write_text, load_field_any
from ..services.functionals import ProblemSpec, build_problem, stationary_density
from ..services.grid import Grid, GridFunction, build_grid
from ..services.metrics import format_metrics
from ..services.presets import DENSITY_PRESETS, FIELD_PRESETS, PROBLEM_PRESETS, initial_values, preset_field

logger = logging.getLogger("jko_lab.commands")

_OVERRIDE_ENV: Dict[str, str] = {
    "newton_tol": "JKO_NEWTON_TOL",
    "sinkhorn_tol": "JKO_SINKHORN_TOL",
    "inner_tol": "JKO_JKO_INNER_TOL",
    "pde_tol": "JKO_PDE_TOL",
}


def apply_overrides(config: RunConfig) -> None:
    """把配置中的容差与确定性开关写入环境并清空 Settings 缓存。"""
    changed = False
    for key, env_name in _OVERRIDE_ENV.items():
        value = getattr(config.solver, key)
        if value is not None:
            os.environ[env_name] = repr(float(value))
            changed = True
    deterministic = "true" if config.deterministic else "false"
    if os.environ.get("JKO_DETERMINISTIC") != deterministic:
        os.environ["JKO_DETERMINISTIC"] = deterministic
        changed = True
    if changed:
        get_settings.cache_clear()


# ============================================
# region 问题构造
# ============================================


def resolve_field(source: str, grid: Grid, base_dir: Path, *, key: str) -> GridFunction:
    """
    字段来源：场预设名或字段文件路径（相对配置文件目录）。

    参数:
        source: 预设名或路径。
        grid: 目标网格。
        base_dir: 相对路径的基准目录。
        key: 配置键名（用于错误信息）。
    返回:
        GridFunction。
    """
    if source in FIELD_PRESETS:
        return preset_field(source, grid)
    path = Path(source)
    if not path.is_absolute():
        path = base_dir / path
    field = load_field_any(path)
    if field.grid != grid:
        raise input_error("GRID_MISMATCH", f"{key} 的网格 {field.grid.resolution} 与配置不一致", field=key)
    return field


def _initial_density(source: str, grid: Grid, base_dir: Path) -> Optional[np.ndarray]:
    if source in DENSITY_PRESETS or source == "stationary":
        return initial_values(source, grid)
    return resolve_field(source, grid, base_dir, key="problem.rho0").values


def build_spec(config: RunConfig, base_dir: Path, *, N: Optional[int] = None) -> ProblemSpec:
    """
    由运行配置构造问题；problem.psi / v0 / f 覆盖预设中的对应字段。

    参数:
        config: 运行配置。
        base_dir: 配置文件所在目录。
        N: 覆盖配置中的步数（收敛研究使用）。
    返回:
        ProblemSpec。
    """
    problem = config.problem
    grid = build_grid(problem.dim, problem.resolution, problem.period)
    psi_source = problem.psi
    v0_source = problem.v0
    if problem.preset is not None:
        entry = PROBLEM_PRESETS.get(problem.preset)
        if entry is None:
            raise input_error("PRESET_UNKNOWN", f"未知的问题预设: {problem.preset}", field="problem.preset")
        psi_source = psi_source or entry.psi
        v0_source = v0_source or entry.v0
    psi = resolve_field(psi_source, grid, base_dir, key="problem.psi")
    v0 = resolve_field(v0_source, grid, base_dir, key="problem.v0") if v0_source else None
    f = resolve_field(problem.f, grid, base_dir, key="problem.f") if problem.f else None
    values = _initial_density(problem.rho0, grid, base_dir)
    stationary = values is None
    if stationary:
        values = np.ones(grid.shape)
    elif problem.perturbation > 0:
        rng = np.random.default_rng(config.seed)
        values = values * (1.0 + problem.perturbation * rng.uniform(-1.0, 1.0, size=grid.shape))
    spec = build_problem(
        grid,
        psi,
        values,
        problem.K,
        N if N is not None else problem.N,
        v0=v0,
        f=f,
        mode=problem.mode,
        name=problem.preset or "custom",
    )
    if stationary:
        spec = spec.with_rho0(stationary_density(spec))
    return spec


# endregion
# ============================================

# ============================================
# region 输出目录
# ============================================


def prepare_output(directory: Optional[str], config: Optional[RunConfig] = None) -> Path:
    """
    确定并创建输出目录（命令行参数优先于配置）。

    参数:
        directory: 命令行给出的目录。
        config: 运行配置。
    返回:
        输出目录路径。
    """
    chosen = directory or (config.output.dir if config is not None else None)
    if not chosen:
        raise input_error("OUTPUT_REQUIRED", "需要通过 --out 或 output.dir 指定输出目录", field="out")
    target = Path(chosen)
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise input_error("OUTPUT_NOT_WRITABLE", f"无法创建输出目录 {target}: {exc}", field=str(target)) from exc
    if not os.access(target, os.W_OK):
        raise input_error("OUTPUT_NOT_WRITABLE", f"输出目录不可写: {target}", field=str(target))
    return target


def finish_output(target: Path, command: str, **fields) -> None:
    """写出 metrics.prom 并记录命令完成事件。"""
    atomic_write_text(target / "metrics.prom", format_metrics())
    logger.info(json.dumps({"event": "command", "command": command, "output": str(target), **fields}))


# endregion
# ============================================
