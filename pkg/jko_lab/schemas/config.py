"""
文件名: config.py
描述: 运行配置（TOML）与轨迹清单的 Pydantic 模型。
主要功能:
    - RunConfig: problem / solver / study / output 各节及 seed、deterministic。
    - TrajectoryManifest / StepRecord: 轨迹目录中 manifest.json 的结构。
    - load_run_config: 解析 TOML 并把校验失败折叠为 CONFIG_INVALID。
依赖: pydantic, tomllib
"""

from __future__ import annotations

import hashlib
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: tomli 是 tomllib 的同 API 回移版本
    import tomli as tomllib
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ErrorDetail, input_error

# ============================================
# region 运行配置
# ============================================


class ProblemSection(BaseModel):
    """问题定义：预设名或字段来源（预设名或文件路径）。"""

    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    dim: int = Field(default=1, ge=1, le=2)
    resolution: int = Field(default=64, ge=4)
    period: float = Field(default=1.0, gt=0)
    K: float = Field(default=0.1, gt=0)
    N: int = Field(default=16, ge=1)
    rho0: str = "cos"
    psi: Optional[str] = None
    v0: Optional[str] = None
    f: Optional[str] = None
    mode: str = Field(default="manufactured", pattern="^(manufactured|solved)$")
    perturbation: float = Field(default=0.0, ge=0, lt=1)

    @model_validator(mode="after")
    def _check_sources(self) -> "ProblemSection":
        if self.preset is None and self.psi is None:
            raise ValueError("preset 与 psi 至少给出一个")
        return self


class SolverSection(BaseModel):
    """求解器选择与容差覆盖（缺省沿用 JKO_* 环境配置）。"""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = Field(default=None, pattern="^(ma_1d|sinkhorn)$")
    ot: str = Field(default="lp", pattern="^(lp|exact1d|sinkhorn)$")
    eps: Optional[float] = Field(default=None, gt=0)
    newton_tol: Optional[float] = Field(default=None, gt=0)
    sinkhorn_tol: Optional[float] = Field(default=None, gt=0)
    inner_tol: Optional[float] = Field(default=None, gt=0)
    pde_tol: Optional[float] = Field(default=None, gt=0)


class StudySection(BaseModel):
    """收敛研究：N 列表、参考步长与采样时刻。"""

    model_config = ConfigDict(extra="forbid")

    N_list: List[int] = Field(default_factory=lambda: [16, 32, 64])
    dt_ref: Optional[float] = Field(default=None, gt=0)
    sample_times: Optional[List[float]] = None

    @field_validator("N_list")
    @classmethod
    def _check_n_list(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("N_list 不能为空")
        if any(n < 1 for n in value):
            raise ValueError("N_list 中的值必须 ≥ 1")
        return sorted(set(value))


class OutputSection(BaseModel):
    """输出目录与字段格式。"""

    model_config = ConfigDict(extra="forbid")

    dir: Optional[str] = None
    binary: bool = False


class RunConfig(BaseModel):
    """一次运行的完整配置。"""

    model_config = ConfigDict(extra="forbid")

    problem: ProblemSection
    solver: SolverSection = Field(default_factory=SolverSection)
    study: StudySection = Field(default_factory=StudySection)
    output: OutputSection = Field(default_factory=OutputSection)
    seed: int = Field(default=0, ge=0)
    deterministic: bool = True

    def config_hash(self) -> str:
        """规范化 JSON 的 sha256 前 16 位。"""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _location(error: dict) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "config"


def load_run_config(path: Path) -> RunConfig:
    """
    读取并校验 TOML 配置。

    参数:
        path: 配置文件路径。
    返回:
        RunConfig 实例。
    """
    source = Path(path)
    if not source.is_file():
        raise input_error("CONFIG_NOT_FOUND", f"配置文件不存在: {source}", field=str(source))
    try:
        raw = tomllib.loads(source.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise input_error("CONFIG_INVALID", f"配置文件解析失败 {source}: {exc}", field=str(source)) from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        errors = exc.errors()
        first = _location(errors[0])
        error = input_error("CONFIG_INVALID", f"配置项 {first} 无效: {errors[0].get('msg', '')}")
        error.details = [
            ErrorDetail(field=_location(item), code="CONFIG_INVALID", message=str(item.get("msg", "")))
            for item in errors
        ]
        raise error from exc


# endregion
# ============================================

# ============================================
# region 轨迹清单
# ============================================


class StepRecord(BaseModel):
    """单步摘要。"""

    step: int = Field(..., ge=1)
    cost: float
    objective: float
    energy: float
    lambda_value: float
    inner_iterations: int = Field(..., ge=0)
    ma_residual_max: float
    weak_residual_max: float
    mass: float
    entropic_bias: float = 0.0


class TrajectoryManifest(BaseModel):
    """轨迹目录的 manifest.json。"""

    model_config = ConfigDict(extra="forbid")

    version: int = 1
    name: str
    mode: str
    dim: int = Field(..., ge=1, le=2)
    resolution: List[int]
    period: float = Field(..., gt=0)
    K: float = Field(..., gt=0)
    N: int = Field(..., ge=1)
    h: float = Field(..., gt=0)
    solver: str
    config_hash: str
    binary: bool = False
    partial: bool = False
    failure: Optional[dict] = None
    lambdas: List[float]
    steps: List[StepRecord]


# endregion
# ============================================
