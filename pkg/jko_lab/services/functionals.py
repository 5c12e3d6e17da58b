"""
文件名: functionals.py
描述: 自由能、变分场 F 与 (Ψ, f, v0) 一致性方程。
主要功能:
    - ProblemSpec / EnergyValue 数据结构与 build_problem 校验构造。
    - variation_field（F = log ρ − log v0 + Ψ）、free_energy。
    - f_from_v0（制造解模式）、v0_from_f（稀疏 LU 逆幂迭代）、weight_equation_residual。
    - stationary_density 与 normalizing_constant。
依赖: numpy, scipy
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..config import get_settings
from ..errors import ensure_positive, input_error, solver_error
from .grid import (
    Grid,
    GridFunction,
    Measure,
    deterministic_sum,
    gradient_array,
    integrate_array,
    laplacian_array,
    lebesgue_integral,
)
from .transport import DiscreteDensity

logger = logging.getLogger("jko_lab.functionals")

MODE_MANUFACTURED = "manufactured"
MODE_SOLVED = "solved"

# ============================================
# region 数据结构
# ============================================


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """
    一个完整问题：网格、势 Ψ、源项 f、正权重 v0、初始密度 ρ0 与时间参数 K、N。
    """

    grid: Grid
    psi: GridFunction
    f: GridFunction
    v0: GridFunction
    rho0: DiscreteDensity
    K: float
    N: int
    mode: str = MODE_MANUFACTURED
    name: str = "custom"
    consistency_residual: float = 0.0

    @property
    def measure(self) -> Measure:
        return self.rho0.measure

    @property
    def h(self) -> float:
        return self.K / self.N

    def with_rho0(self, rho0: DiscreteDensity, *, N: Optional[int] = None, K: Optional[float] = None) -> "ProblemSpec":
        """替换初始密度或时间参数，其余字段不变。"""
        return ProblemSpec(
            grid=self.grid,
            psi=self.psi,
            f=self.f,
            v0=self.v0,
            rho0=rho0,
            K=self.K if K is None else K,
            N=self.N if N is None else N,
            mode=self.mode,
            name=self.name,
            consistency_residual=self.consistency_residual,
        )


@dataclass(frozen=True)
class EnergyValue:
    """自由能及其熵部分与势部分。"""

    total: float
    entropy: float
    potential: float


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """v0_from_f 的结果：单位 Lebesgue 质量的 v0、主特征值、残差与迭代次数。"""

    v0: GridFunction
    eigenvalue: float
    residual: float
    iterations: int


# endregion
# ============================================

# ============================================
# region 变分场与自由能
# ============================================


def variation_field(rho: DiscreteDensity, spec: ProblemSpec) -> GridFunction:
    """
    F = log ρ − log v0 + Ψ。

    参数:
        rho: 严格正的密度。
        spec: 问题定义。
    返回:
        F 网格函数。
    """
    values = rho.values
    if np.any(values <= 0):
        bad = int(np.flatnonzero(values.ravel() <= 0)[0])
        raise input_error("DENSITY_NOT_POSITIVE", f"密度在节点 {bad} 处非正，无法取对数", field=f"node[{bad}]")
    return GridFunction(spec.grid, np.log(values) - np.log(spec.v0.values) + spec.psi.values)


def free_energy(rho: DiscreteDensity, spec: ProblemSpec) -> EnergyValue:
    """
    E(ρ) = ∫(log ρ − log v0 + Ψ) ρ dμ，约定 0·log 0 = 0。

    参数:
        rho: 非负密度。
        spec: 问题定义。
    返回:
        EnergyValue。
    """
    values = rho.values
    safe = np.where(values > 0, values, 1.0)
    entropy_density = np.where(values > 0, values * np.log(safe), 0.0)
    potential_density = (spec.psi.values - np.log(spec.v0.values)) * values
    entropy = integrate_array(entropy_density, spec.measure)
    potential = integrate_array(potential_density, spec.measure)
    return EnergyValue(total=entropy + potential, entropy=entropy, potential=potential)


def stationary_density(spec: ProblemSpec) -> DiscreteDensity:
    """
    稳态密度 ρ∞ ∝ v0·e^{−Ψ}，对 μ 归一化。

    参数:
        spec: 问题定义。
    返回:
        DiscreteDensity。
    """
    shape = spec.v0.values * np.exp(-(spec.psi.values - spec.psi.values.min()))
    return DiscreteDensity.from_values(shape, spec.measure)


def normalizing_constant(spec: ProblemSpec) -> float:
    """常数 C，使 ∫C e^{log v0 − Ψ} dμ = 1，因而 E(ρ∞) = log C。"""
    return 1.0 / lebesgue_integral(spec.v0.values ** 2 * np.exp(-spec.psi.values), spec.grid)


# endregion
# ============================================

# ============================================
# region 一致性方程
# ============================================


def _require_positive_v0(v0: GridFunction) -> None:
    values = v0.values
    if np.any(values <= 0):
        bad = int(np.flatnonzero(values.ravel() <= 0)[0])
        raise input_error("V0_NOT_POSITIVE", f"v0 在节点 {bad} 处非正", field="v0")


def f_from_v0(psi: GridFunction, v0: GridFunction) -> GridFunction:
    """
    制造解模式: f = ΔΨ − (Δv0 − ⟨∇v0, ∇Ψ⟩)/v0，离散一致性残差恒为 0。

    参数:
        psi: 势 Ψ。
        v0: 正权重。
    返回:
        源项 f。
    """
    _require_positive_v0(v0)
    grid = psi.grid
    grad_v = gradient_array(v0.values, grid)
    grad_psi = gradient_array(psi.values, grid)
    advection = np.sum(grad_v * grad_psi, axis=0)
    values = laplacian_array(psi.values, grid) - (laplacian_array(v0.values, grid) - advection) / v0.values
    return GridFunction(grid, values)


def weight_equation_residual(psi: GridFunction, f: GridFunction, v0: GridFunction) -> GridFunction:
    """
    离散残差 Δv0 − ⟨∇v0, ∇Ψ⟩ − (ΔΨ − f)·v0。

    参数:
        psi: 势 Ψ。
        f: 源项。
        v0: 权重。
    返回:
        残差网格函数。
    """
    grid = psi.grid
    grad_v = gradient_array(v0.values, grid)
    grad_psi = gradient_array(psi.values, grid)
    residual = (
        laplacian_array(v0.values, grid)
        - np.sum(grad_v * grad_psi, axis=0)
        - (laplacian_array(psi.values, grid) - f.values) * v0.values
    )
    return GridFunction(grid, residual)


def _periodic_shift(grid: Grid, axis: int, step: int) -> sp.csr_matrix:
    """周期平移算子 (Su)[i] = u[i + step·e_axis]。"""
    index = np.arange(grid.size).reshape(grid.shape)
    target = np.roll(index, -step, axis=axis).ravel()
    return sp.csr_matrix((np.ones(grid.size), (np.arange(grid.size), target)), shape=(grid.size, grid.size))


def consistency_operator(psi: GridFunction, f: GridFunction) -> sp.csr_matrix:
    """
    一致性算子 L v = Δv − ⟨∇v, ∇Ψ⟩ − (ΔΨ − f) v 的稀疏矩阵，与 weight_equation_residual 使用相同模板。

    参数:
        psi: 势 Ψ。
        f: 源项。
    返回:
        size×size 稀疏矩阵。
    """
    grid = psi.grid
    grad_psi = gradient_array(psi.values, grid)
    operator = sp.diags((f.values - laplacian_array(psi.values, grid)).ravel())
    for axis in range(grid.dim):
        dx = grid.spacings[axis]
        forward = _periodic_shift(grid, axis, 1)
        backward = _periodic_shift(grid, axis, -1)
        identity = sp.identity(grid.size)
        laplace = (forward - 2.0 * identity + backward) / (dx * dx)
        centered = (forward - backward) / (2.0 * dx)
        operator = operator + laplace - sp.diags(grad_psi[axis].ravel()) @ centered
    return sp.csr_matrix(operator)


def v0_from_f(psi: GridFunction, f: GridFunction) -> EigenSolution:
    """
    求解模式: 以 σ = Gershgorin 上界 + 1 为位移的逆幂迭代，求一致性算子的主特征对。
    主特征值非零时一并返回，由调用方平移 f。

    参数:
        psi: 势 Ψ。
        f: 源项。
    返回:
        EigenSolution（v0 归一化到 ∫v0 dx = 1）。
    """
    settings = get_settings()
    grid = psi.grid
    operator = consistency_operator(psi, f)
    radius = np.asarray(abs(operator).sum(axis=1)).ravel()
    diagonal = operator.diagonal()
    sigma = float(np.max(diagonal + (radius - np.abs(diagonal)))) + 1.0
    lu = splu(sp.csc_matrix(sigma * sp.identity(grid.size) - operator))
    vector = np.ones(grid.size)
    eigenvalue = 0.0
    residual = math.inf
    for iteration in range(1, settings.eigen_max_iter + 1):
        vector = lu.solve(vector)
        vector = vector / np.max(np.abs(vector))
        applied = operator @ vector
        eigenvalue = float(np.dot(vector, applied) / np.dot(vector, vector))
        residual = float(np.max(np.abs(applied - eigenvalue * vector)))
        if residual <= settings.eigen_tol:
            break
    else:
        raise solver_error(
            "EIGEN_NOT_CONVERGED",
            f"逆幂迭代在 {settings.eigen_max_iter} 次内未收敛，最后残差 {residual:.3e}",
            field="v0",
        )
    if np.max(vector) <= 0:
        vector = -vector
    if np.min(vector) <= 0:
        raise solver_error(
            "EIGENVECTOR_INDEFINITE",
            "主特征向量变号，无法得到正的 v0；请改用 manufactured 模式（由 v0 推出 f）",
            field="v0",
        )
    values = vector.reshape(grid.shape)
    scale = lebesgue_integral(values, grid)
    values = values / scale
    logger.info(
        json.dumps(
            {"event": "eigen_solve", "nodes": grid.size, "eigenvalue": eigenvalue, "residual": residual, "iterations": iteration}
        )
    )
    return EigenSolution(v0=GridFunction(grid, values), eigenvalue=eigenvalue, residual=residual / scale, iterations=iteration)


# endregion
# ============================================

# ============================================
# region 问题构造
# ============================================


def build_problem(
    grid: Grid,
    psi: GridFunction,
    rho0_values: np.ndarray,
    K: float,
    N: int,
    *,
    v0: Optional[GridFunction] = None,
    f: Optional[GridFunction] = None,
    mode: str = MODE_MANUFACTURED,
    name: str = "custom",
) -> ProblemSpec:
    """
    校验并构造 ProblemSpec。manufactured 模式由 v0 推出 f；solved 模式由 f 求 v0，
    主特征值非零时将 f 平移该值使一致性方程成立。

    参数:
        grid: 网格。
        psi: 势 Ψ。
        rho0_values: 初始密度节点值（相对 μ，构造时归一化）。
        K: 终止时间。
        N: 步数。
        v0: manufactured 模式所需的权重（归一化到单位 Lebesgue 质量）。
        f: solved 模式所需的源项。
        mode: manufactured 或 solved。
        name: 问题名称。
    返回:
        ProblemSpec。
    """
    settings = get_settings()
    ensure_positive(float(K), field="K")
    if int(N) < 1:
        raise input_error("N_INVALID", f"N 必须为正整数，实际为 {N!r}", field="N")
    if mode == MODE_MANUFACTURED:
        if v0 is None:
            raise input_error("V0_REQUIRED", "manufactured 模式需要给出 v0", field="v0")
        _require_positive_v0(v0)
        v0 = GridFunction(grid, v0.values / lebesgue_integral(v0.values, grid))
        f = f_from_v0(psi, v0)
    elif mode == MODE_SOLVED:
        if f is None:
            raise input_error("F_REQUIRED", "solved 模式需要给出 f", field="f")
        solution = v0_from_f(psi, f)
        v0 = solution.v0
        if abs(solution.eigenvalue) > settings.consistency_tol:
            logger.info(json.dumps({"event": "source_shift", "eigenvalue": solution.eigenvalue}))
            f = GridFunction(grid, f.values - solution.eigenvalue)
    else:
        raise input_error("MODE_INVALID", f"未知的构造模式: {mode}", field="mode")
    residual = float(np.max(np.abs(weight_equation_residual(psi, f, v0).values)))
    if residual > settings.consistency_tol:
        if mode == MODE_MANUFACTURED:
            raise input_error(
                "CONSISTENCY_VIOLATION",
                f"一致性残差 {residual:.3e} 超过容差 {settings.consistency_tol:.1e}",
                field="f",
            )
        logger.warning(json.dumps({"event": "consistency_warning", "residual": residual}))
    measure = Measure(grid, v0)
    rho0 = DiscreteDensity.from_values(rho0_values, measure)
    return ProblemSpec(
        grid=grid,
        psi=psi,
        f=f,
        v0=v0,
        rho0=rho0,
        K=float(K),
        N=int(N),
        mode=mode,
        name=name,
        consistency_residual=residual,
    )


def energy_gap(spec: ProblemSpec) -> float:
    """E(ρ0) − E(ρ∞)，非负。"""
    return free_energy(spec.rho0, spec).total - free_energy(stationary_density(spec), spec).total


def total_mass(rho: DiscreteDensity) -> float:
    """∫ρ dμ（确定性求和）。"""
    return deterministic_sum(rho.masses)


# endregion
# ============================================
