"""
文件名: reports.py
描述: 运行产物的序列化：CSV 表、JSON 摘要与轨迹目录。
主要功能:
    - format_csv / write_csv: 首行 `# config_hash=...`，表头单位写在方括号中，浮点 .17g。
    - write_report_csv / report_summary: 估计报告的 CSV 与 JSON 摘要。
    - dump_trajectory / load_trajectory: rho_XXXX、psi/f/v0 字段与 manifest.json。
依赖: numpy, pydantic
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np
from pydantic import ValidationError

from ..errors import AppError, ErrorDetail, input_error
from ..schemas.config import StepRecord, TrajectoryManifest
from .estimates import EstimateReport
from .field_io import atomic_write_text, format_float, load_field_any, write_field, write_field_binary
from .functionals import ProblemSpec, weight_equation_residual, free_energy, variation_field
from .grid import GridFunction, Measure, max_hessian_eigenvalue
from .jko import LAMBDA_CAP, FlowTrajectory, JkoStepResult
from .transport import DiscreteDensity, TransportResult

logger = logging.getLogger("jko_lab.reports")

PathLike = Union[str, Path]
Cell = Union[str, int, float, bool]

# ============================================
# region CSV / JSON
# ============================================


def _format_cell(value: Cell) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text


def format_csv(config_hash: str, header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> str:
    """
    生成 CSV 文本。

    参数:
        config_hash: 配置哈希。
        header: 列名（单位写在方括号内，例如 cost[d^2]）。
        rows: 数据行。
    返回:
        CSV 文本。
    """
    lines = [f"# config_hash={config_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(cell) for cell in row))
    return "\n".join(lines) + "\n"


def write_csv(path: PathLike, config_hash: str, header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> None:
    atomic_write_text(path, format_csv(config_hash, header, rows))


def write_json(path: PathLike, payload: dict) -> None:
    """原子写入 JSON（键排序，保证重复运行字节一致）。"""
    atomic_write_text(path, json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


REPORT_HEADER = [
    "name",
    "step[-]",
    "left[-]",
    "right[-]",
    "margin[-]",
    "allowance[-]",
    "passed[bool]",
    "strict_passed[bool]",
    "guaranteed[bool]",
    "note",
]


def write_report_csv(path: PathLike, report: EstimateReport, config_hash: str) -> None:
    """估计报告：每条不等式每步一行。"""
    rows = [
        [r.name, r.step, r.left, r.right, r.margin, r.allowance, r.passed, r.strict_passed, r.guaranteed, r.note]
        for r in report.records
    ]
    write_csv(path, config_hash, REPORT_HEADER, rows)


def report_summary(report: EstimateReport) -> dict:
    """
    估计报告的 JSON 摘要。

    参数:
        report: 估计报告。
    返回:
        可序列化的字典。
    """
    failures = report.failures(guaranteed_only=False)
    return {
        "all_guaranteed_pass": report.all_guaranteed_pass,
        "records": len(report.records),
        "guaranteed_failures": [
            {"name": r.name, "step": r.step, "margin": r.margin} for r in failures if r.guaranteed
        ],
        "informational_failures": [
            {"name": r.name, "step": r.step, "margin": r.margin} for r in failures if not r.guaranteed
        ],
        "constants": {key: float(value) for key, value in sorted(report.constants.items())},
        "flags": {key: value for key, value in sorted(report.flags.items())},
    }


STEPS_HEADER = [
    "step[-]",
    "t[time]",
    "cost[d^2]",
    "objective[-]",
    "energy[-]",
    "lambda[1/length^2]",
    "h_lambda[-]",
    "inner_iterations[-]",
    "ma_residual_max[-]",
    "weak_residual_max[-]",
    "mass[-]",
    "min_rho[-]",
]


def steps_rows(traj: FlowTrajectory) -> List[List[Cell]]:
    """轨迹逐步诊断表。"""
    rows: List[List[Cell]] = []
    for k, result in enumerate(traj.steps, start=1):
        rho = result.rho_next
        rows.append(
            [
                k,
                k * traj.h,
                result.transport.cost,
                result.objective,
                result.energy.total,
                result.lambda_value,
                traj.h * result.lambda_value,
                result.inner_iterations,
                result.ma_residual_max,
                result.weak_residual_max,
                rho.mass,
                float(rho.values.min()),
            ]
        )
    return rows


# endregion
# ============================================

# ============================================
# region 轨迹目录
# ============================================


def _field_name(stem: str, binary: bool) -> str:
    return f"{stem}.bin" if binary else f"{stem}.txt"


def _write(path: Path, field: GridFunction, binary: bool) -> None:
    if binary:
        write_field_binary(path, field)
    else:
        write_field(path, field)


def build_manifest(traj: FlowTrajectory, config_hash: str, *, binary: bool = False) -> TrajectoryManifest:
    spec = traj.spec
    failure = None
    if traj.failure is not None:
        failure = {"field": traj.failure.field, "code": traj.failure.code, "message": traj.failure.message}
    steps = [
        StepRecord(
            step=k,
            cost=result.transport.cost,
            objective=result.objective,
            energy=result.energy.total,
            lambda_value=result.lambda_value,
            inner_iterations=result.inner_iterations,
            ma_residual_max=result.ma_residual_max,
            weak_residual_max=result.weak_residual_max,
            mass=result.rho_next.mass,
            entropic_bias=result.entropic_bias,
        )
        for k, result in enumerate(traj.steps, start=1)
    ]
    return TrajectoryManifest(
        name=spec.name,
        mode=spec.mode,
        dim=spec.grid.dim,
        resolution=list(spec.grid.resolution),
        period=spec.grid.period,
        K=spec.K,
        N=spec.N,
        h=traj.h,
        solver=traj.solver,
        config_hash=config_hash,
        binary=binary,
        partial=not traj.complete,
        failure=failure,
        lambdas=list(traj.lambdas),
        steps=steps,
    )


def dump_trajectory(traj: FlowTrajectory, directory: PathLike, config_hash: str, *, binary: bool = False) -> TrajectoryManifest:
    """
    写出轨迹目录：rho_0000..、psi、f、v0 字段文件与 manifest.json（最后写入）。

    参数:
        traj: 轨迹。
        directory: 目标目录。
        config_hash: 配置哈希。
        binary: 是否使用二进制字段格式。
    返回:
        写入的清单。
    """
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    spec = traj.spec
    for stem, field in (("psi", spec.psi), ("f", spec.f), ("v0", spec.v0)):
        _write(target / _field_name(stem, binary), field, binary)
    for k, rho in enumerate(traj.densities):
        _write(target / _field_name(f"rho_{k:04d}", binary), rho.rho, binary)
    manifest = build_manifest(traj, config_hash, binary=binary)
    write_json(target / "manifest.json", manifest.model_dump(mode="json"))
    logger.info(json.dumps({"event": "trajectory_dump", "directory": str(target), "densities": len(traj.densities)}))
    return manifest


def _invalid(message: str, source: Path) -> AppError:
    return input_error("TRAJECTORY_INVALID", message, field=str(source))


def read_manifest(directory: PathLike) -> TrajectoryManifest:
    """读取并校验轨迹目录的 manifest.json。"""
    manifest_path = Path(directory) / "manifest.json"
    if not manifest_path.is_file():
        raise input_error("TRAJECTORY_NOT_FOUND", f"轨迹清单不存在: {manifest_path}", field=str(manifest_path))
    try:
        manifest = TrajectoryManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, ValidationError) as exc:
        raise _invalid(f"轨迹清单解析失败 {manifest_path}: {exc}", manifest_path) from exc
    return manifest


def load_trajectory(directory: PathLike) -> FlowTrajectory:
    """
    读取轨迹目录并重建 FlowTrajectory；λ 与能量按读入的密度重新计算。

    参数:
        directory: 轨迹目录。
    返回:
        FlowTrajectory（step 中的 transport 仅含 cost）。
    """
    source = Path(directory)
    manifest = read_manifest(source)
    try:
        psi = load_field_any(source / _field_name("psi", manifest.binary))
        f = load_field_any(source / _field_name("f", manifest.binary))
        v0 = load_field_any(source / _field_name("v0", manifest.binary))
        grid = psi.grid
        if f.grid != grid or v0.grid != grid or list(grid.resolution) != manifest.resolution:
            raise _invalid("字段网格与清单不一致", source)
        measure = Measure(grid, v0)
        densities: List[DiscreteDensity] = []
        for k in range(len(manifest.steps) + 1):
            field = load_field_any(source / _field_name(f"rho_{k:04d}", manifest.binary))
            if field.grid != grid:
                raise _invalid(f"rho_{k:04d} 的网格与清单不一致", source)
            densities.append(DiscreteDensity.from_values(field.values, measure, normalize=False))
    except AppError as exc:
        if exc.code == "TRAJECTORY_INVALID":
            raise
        raise _invalid(f"轨迹目录 {source} 无效: {exc.message}", source) from exc
    residual = float(np.max(np.abs(weight_equation_residual(psi, f, v0).values)))
    spec = ProblemSpec(
        grid=grid,
        psi=psi,
        f=f,
        v0=v0,
        rho0=densities[0],
        K=manifest.K,
        N=manifest.N,
        mode=manifest.mode,
        name=manifest.name,
        consistency_residual=residual,
    )
    lambdas = [max_hessian_eigenvalue(variation_field(rho, spec).values, grid) for rho in densities]
    steps: List[JkoStepResult] = []
    for record, rho, lam in zip(manifest.steps, densities[1:], lambdas[1:]):
        steps.append(
            JkoStepResult(
                rho_next=rho,
                transport=TransportResult(cost=record.cost, potentials=None, solver=manifest.solver),
                objective=record.objective,
                inner_iterations=record.inner_iterations,
                ma_residual_max=record.ma_residual_max,
                weak_residual_max=record.weak_residual_max,
                energy=free_energy(rho, spec),
                lambda_value=lam,
                solver=manifest.solver,
                entropic_bias=record.entropic_bias,
            )
        )
    failure = None
    if manifest.failure is not None:
        failure = ErrorDetail(**manifest.failure)
    return FlowTrajectory(
        spec=spec,
        h=manifest.h,
        densities=densities,
        steps=steps,
        lambdas=lambdas,
        solver=manifest.solver,
        failure=failure,
        cap_violations=[k for k, lam in enumerate(lambdas) if manifest.h * lam > LAMBDA_CAP],
    )


# endregion
# ============================================
