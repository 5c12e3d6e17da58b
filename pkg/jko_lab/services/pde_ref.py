"""
文件名: pde_ref.py
描述: 抛物方程 ∂tφ = Δφ + ⟨∇φ,∇Ψ⟩ + fφ 的 Crank–Nicolson 参考解。
主要功能:
    - pde_operator: 加权通量形式的稀疏算子 L。
    - CrankNicolsonStepper / step_cn: 一维循环三对角直接解，二维 BiCGSTAB。
    - solve_pde: 调整时间步以精确落在采样时刻。
依赖: numpy, scipy
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import bicgstab

from ..config import get_settings
from ..errors import AppError, ensure_positive, input_error, solver_error
from .functionals import ProblemSpec, f_from_v0
from .grid import GridFunction
from .linalg import solve_cyclic_tridiagonal
from .metrics import record_solver_run

logger = logging.getLogger("jko_lab.pde_ref")


@dataclass(frozen=True, eq=False)
class PdeTrajectory:
    """参考解在采样时刻的快照。dt 为名义时间步，实际步长按采样区间等分。"""

    spec: ProblemSpec
    dt: float
    times: List[float]
    snapshots: List[GridFunction]

    def at(self, t: float) -> GridFunction:
        """取与 t 最接近的采样快照。"""
        index = int(np.argmin([abs(s - t) for s in self.times]))
        return self.snapshots[index]


# ============================================
# region 空间算子
# ============================================


def pde_operator(spec: ProblemSpec) -> sp.csr_matrix:
    """
    L φ = v0⁻¹ ∇·(v0 ρ̂ ∇(φ/ρ̂)) + (f − f̂) φ，ρ̂ = v0 e^{−Ψ}，f̂ = f_from_v0(Ψ, v0)；
    面系数取相邻节点 v0ρ̂ 的平均。

    参数:
        spec: 问题定义。
    返回:
        size×size 稀疏矩阵。
    """
    grid = spec.grid
    v0 = spec.v0.values
    reference = v0 * np.exp(-(spec.psi.values - spec.psi.values.min()))
    weight = v0 * reference
    reaction = spec.f.values - f_from_v0(spec.psi, spec.v0).values
    index = np.arange(grid.size).reshape(grid.shape)
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    diagonal = reaction.copy()
    for axis in range(grid.dim):
        dx2 = grid.spacings[axis] ** 2
        for step in (1, -1):
            neighbour_weight = np.roll(weight, -step, axis=axis)
            face = 0.5 * (weight + neighbour_weight)
            neighbour_reference = np.roll(reference, -step, axis=axis)
            rows.append(index.ravel())
            cols.append(np.roll(index, -step, axis=axis).ravel())
            vals.append((face / (v0 * dx2 * neighbour_reference)).ravel())
            diagonal = diagonal - face / (v0 * dx2 * reference)
    rows.append(index.ravel())
    cols.append(index.ravel())
    vals.append(diagonal.ravel())
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return sp.csr_matrix(matrix)


# endregion
# ============================================

# ============================================
# region Crank–Nicolson
# ============================================


class CrankNicolsonStepper:
    """固定 dt 的 Crank–Nicolson 步进器，缓存 (I ± dt/2·L)。"""

    def __init__(self, spec: ProblemSpec, dt: float, operator: Optional[sp.csr_matrix] = None) -> None:
        ensure_positive(float(dt), field="dt")
        self.spec = spec
        self.dt = float(dt)
        self.tol = get_settings().pde_tol
        operator = pde_operator(spec) if operator is None else operator
        identity = sp.identity(spec.grid.size, format="csr")
        self.explicit = sp.csr_matrix(identity + 0.5 * self.dt * operator)
        self.implicit = sp.csr_matrix(identity - 0.5 * self.dt * operator)
        if spec.grid.dim == 1:
            n = spec.grid.size
            dense_rows = np.arange(n)
            self.lower = np.asarray(self.implicit[dense_rows, (dense_rows - 1) % n]).ravel()
            self.diag = self.implicit.diagonal()
            self.upper = np.asarray(self.implicit[dense_rows, (dense_rows + 1) % n]).ravel()

    def step(self, values: np.ndarray) -> np.ndarray:
        """推进一步，返回形状 grid.shape 的数组。"""
        grid = self.spec.grid
        current = np.asarray(values, dtype=float).ravel()
        rhs = self.explicit @ current
        if grid.dim == 1:
            updated = solve_cyclic_tridiagonal(self.lower, self.diag, self.upper, rhs)
        else:
            updated, info = bicgstab(self.implicit, rhs, x0=current, rtol=self.tol, atol=0.0, maxiter=10 * grid.size)
            if info != 0:
                raise solver_error("PDE_SOLVE_FAILED", f"BiCGSTAB 未收敛 (info={info})", field="pde")
        if not np.all(np.isfinite(updated)):
            raise solver_error("PDE_SOLVE_FAILED", "Crank–Nicolson 解出现非有限值", field="pde")
        return updated.reshape(grid.shape)


def step_cn(phi: GridFunction, dt: float, spec: ProblemSpec) -> GridFunction:
    """
    (I − dt/2·L)φ' = (I + dt/2·L)φ。

    参数:
        phi: 当前解。
        dt: 时间步长。
        spec: 问题定义。
    返回:
        下一步解。
    """
    return GridFunction(spec.grid, CrankNicolsonStepper(spec, dt).step(phi.values))


def solve_pde(spec: ProblemSpec, dt: float, sample_times: Sequence[float]) -> PdeTrajectory:
    """
    从 ρ0 出发推进到各采样时刻；每个采样区间等分为不超过 dt 的子步。

    参数:
        spec: 问题定义。
        dt: 名义时间步，0 < dt ≤ K。
        sample_times: 采样时刻，均位于 [0, K]。
    返回:
        PdeTrajectory。
    """
    ensure_positive(float(dt), field="dt")
    if dt > spec.K:
        raise input_error("DT_TOO_LARGE", f"dt = {dt} 超过 K = {spec.K}", field="dt")
    horizon = float(spec.K)
    near = 4.0 * math.ulp(horizon)
    times = sorted(set(horizon if abs(float(t) - horizon) <= near else float(t) for t in sample_times))
    if not times:
        raise input_error("SAMPLE_TIMES_EMPTY", "至少需要一个采样时刻", field="sample_times")
    if times[0] < 0 or times[-1] > spec.K:
        raise input_error("SAMPLE_TIME_OUT_OF_RANGE", f"采样时刻必须位于 [0, {spec.K}] 内", field="sample_times")
    operator = pde_operator(spec)
    steppers: Dict[float, CrankNicolsonStepper] = {}
    start = time.perf_counter()
    current = spec.rho0.values.copy()
    clock = 0.0
    total_steps = 0
    snapshots: List[GridFunction] = []
    try:
        for target in times:
            span = target - clock
            count = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
            if count > 0:
                local_dt = span / count
                key = round(local_dt, 15)
                stepper = steppers.get(key)
                if stepper is None:
                    stepper = CrankNicolsonStepper(spec, local_dt, operator)
                    steppers[key] = stepper
                for _ in range(count):
                    current = stepper.step(current)
                total_steps += count
            clock = target
            snapshots.append(GridFunction(spec.grid, current))
    except AppError:
        record_solver_run("cn", "failed", time.perf_counter() - start, total_steps)
        raise
    duration = time.perf_counter() - start
    record_solver_run("cn", "ok", duration, total_steps)
    logger.info(
        json.dumps({"event": "pde_solve", "dt": dt, "steps": total_steps, "samples": len(times), "duration_ms": int(duration * 1000)})
    )
    return PdeTrajectory(spec=spec, dt=float(dt), times=times, snapshots=snapshots)


# endregion
# ============================================
