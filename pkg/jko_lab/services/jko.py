"""
文件名: jko.py
描述: JKO 时间离散：单步极小化、Monge–Ampère 一阶条件、延拓求解与轨迹生成。
主要功能:
    - jko_step: ma_1d（一维守恒型 Monge–Ampère 的 Newton 解）与 sinkhorn（熵正则近端映射的镜像下降）。
    - ma_residual / weak_residual: 一阶条件与弱形式残差诊断。
    - continuation_solve: 从稳态密度出发沿 s∈[0,1] 的延拓 Newton。
    - run_flow / interpolate: 轨迹生成与分段常数插值。
依赖: numpy, scipy
"""

from __future__ import annotations

import json
import logging
import math
import time
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config import get_settings
from ..errors import AppError, ErrorDetail, ensure_positive, input_error, solver_error
from .functionals import EnergyValue, ProblemSpec, free_energy, stationary_density, variation_field
from .grid import (
    Grid,
    GridFunction,
    deterministic_sum,
    gradient_array,
    hessian_array,
    integrate_array,
    interpolate_periodic,
    laplacian_array,
    matrix_field_sup_norm,
    max_hessian_eigenvalue,
    sup_norm,
    symmetric_eigen_min,
)
from .linalg import solve_cyclic_tridiagonal
from .metrics import record_jko_step, record_solver_run
from .transport import (
    DiscreteDensity,
    SinkhornWorkspace,
    TransportResult,
    barycentric_map,
    c_transform,
    solve_ot_1d,
)

logger = logging.getLogger("jko_lab.jko")

SOLVER_MA_1D = "ma_1d"
SOLVER_SINKHORN = "sinkhorn"
SOLVERS = (SOLVER_MA_1D, SOLVER_SINKHORN)

LAMBDA_CAP = 0.125

# ============================================
# region 数据结构
# ============================================


@dataclass(frozen=True, eq=False)
class JkoStepResult:
    """
    一步 JKO 的结果。objective = transport.cost + h·E(ρ_next)，
    transport.cost 为 ½d² 代价下的传输值。
    """

    rho_next: DiscreteDensity
    transport: TransportResult
    objective: float
    inner_iterations: int
    ma_residual_max: float
    weak_residual_max: float
    energy: EnergyValue
    lambda_value: float
    solver: str
    entropic_bias: float = 0.0
    objective_history: Tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """ρ_0..ρ_N 及逐步诊断；failure 非空表示轨迹在该步中止。"""

    spec: ProblemSpec
    h: float
    densities: List[DiscreteDensity]
    steps: List[JkoStepResult]
    lambdas: List[float]
    solver: str
    failure: Optional[ErrorDetail] = None
    cap_violations: List[int] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.failure is None and len(self.densities) == self.spec.N + 1


@dataclass(frozen=True, eq=False)
class ContinuationResult:
    """延拓求解的结果与 λ(s) 记录。"""

    density: DiscreteDensity
    s_values: List[float]
    lambdas: List[float]
    lambda_bound: float = math.inf


@dataclass
class _NewtonOutcome:
    log_rho: np.ndarray
    iterations: int
    residual: float
    path: List[np.ndarray] = field(default_factory=list)


# endregion
# ============================================

# ============================================
# region 一维守恒型 Monge–Ampère
# ============================================


class CellMass:
    """
    一维前一步测度 ρ_prev·v0 dx 的对偶胞分段线性重构及其提升累积函数 U(y)。
    胞 [x_i − dx/2, x_i + dx/2) 上取 q_i + s_i (y − x_i)，每胞质量精确为 q_i·dx。
    """

    def __init__(self, q: np.ndarray, grid: Grid) -> None:
        self.dx = grid.spacings[0]
        self.m = grid.resolution[0]
        self.q = np.asarray(q, dtype=float).ravel()
        slope = (np.roll(self.q, -1) - np.roll(self.q, 1)) / (2.0 * self.dx)
        limit = 2.0 * self.q / self.dx
        self.s = np.clip(slope, -limit, limit)
        cell_mass = self.q * self.dx
        self.cum = np.concatenate([[0.0], np.cumsum(cell_mass)[:-1]])
        self.total = float(np.sum(cell_mass))

    def _locate(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = np.asarray(y, dtype=float) + 0.5 * self.dx
        k = np.floor(z / self.dx).astype(np.int64)
        local = np.asarray(y, dtype=float) - k * self.dx
        index = np.mod(k, self.m)
        laps = np.floor_divide(k, self.m)
        return index, local, laps

    def cumulative(self, y: np.ndarray) -> np.ndarray:
        """U(y) = ∫_{−dx/2}^{y} q̃，对提升坐标成立。"""
        index, local, laps = self._locate(y)
        half = 0.5 * self.dx
        return (
            laps * self.total
            + self.cum[index]
            + self.q[index] * (local + half)
            + 0.5 * self.s[index] * (local * local - half * half)
        )

    def density(self, y: np.ndarray) -> np.ndarray:
        """重构密度 q̃(y)。"""
        index, local, _ = self._locate(y)
        return self.q[index] + self.s[index] * local


def _face_maps(F: np.ndarray, h: float, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """对偶胞左右端点的像 φ_{i−½}、φ_{i+½}。"""
    dx = grid.spacings[0]
    x = grid.axis_nodes(0)
    right = x + 0.5 * dx + h * (np.roll(F, -1) - F) / dx
    left = x - 0.5 * dx + h * (F - np.roll(F, 1)) / dx
    return left, right


def _conservative_residual(
    log_rho: np.ndarray,
    cells: CellMass,
    spec: ProblemSpec,
    h: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """守恒型残差 R_i = [U(φ_{i+½}) − U(φ_{i−½})]/dx − ρ_i v0_i 及两端点像。"""
    v0 = spec.v0.values.ravel()
    F = log_rho - np.log(v0) + spec.psi.values.ravel()
    left, right = _face_maps(F, h, spec.grid)
    residual = (cells.cumulative(right) - cells.cumulative(left)) / cells.dx - np.exp(log_rho) * v0
    return residual, left, right


def _injective(left: np.ndarray, right: np.ndarray) -> bool:
    return bool(np.all(right > left))


def _newton_ma_1d(
    rho_prev: DiscreteDensity,
    h: float,
    spec: ProblemSpec,
    initial: np.ndarray,
) -> _NewtonOutcome:
    """
    以 log ρ 为未知量的 Newton 迭代，Jacobian 为精确循环三对角阵，残差范数回溯线搜索。

    参数:
        rho_prev: 前一步密度。
        h: 时间步长。
        spec: 问题定义。
        initial: log ρ 初值。
    返回:
        _NewtonOutcome。
    """
    settings = get_settings()
    grid = spec.grid
    dx = grid.spacings[0]
    v0 = spec.v0.values.ravel()
    cells = CellMass(rho_prev.values.ravel() * v0, grid)
    log_rho = np.array(initial, dtype=float).ravel()
    path = [log_rho.copy()]
    residual, left, right = _conservative_residual(log_rho, cells, spec, h)
    if not _injective(left, right):
        raise solver_error(
            "MAP_NOT_INJECTIVE",
            "初值处映射 x + h∇F 不单调（1 + hF″ ≤ 0），步长违反 h·λ ≤ 1/8 假设",
            field="ma_1d",
        )
    norm = float(np.max(np.abs(residual)))
    for iteration in range(1, settings.newton_max_iter + 1):
        if norm <= settings.newton_tol:
            return _NewtonOutcome(log_rho=log_rho, iterations=iteration - 1, residual=norm, path=path)
        p_plus = cells.density(right)
        p_minus = cells.density(left)
        scale = h / (dx * dx)
        upper = p_plus * scale
        lower = p_minus * scale
        diag = -(p_plus + p_minus) * scale - np.exp(log_rho) * v0
        delta = solve_cyclic_tridiagonal(lower, diag, upper, -residual)
        step = 1.0
        accepted = False
        injective_seen = False
        while step >= 1e-10:
            trial = log_rho + step * delta
            trial_residual, trial_left, trial_right = _conservative_residual(trial, cells, spec, h)
            if _injective(trial_left, trial_right):
                injective_seen = True
                trial_norm = float(np.max(np.abs(trial_residual)))
                if trial_norm < (1.0 - 1e-4 * step) * norm or trial_norm <= settings.newton_tol:
                    log_rho, residual, left, right, norm = trial, trial_residual, trial_left, trial_right, trial_norm
                    path.append(log_rho.copy())
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            if not injective_seen:
                raise solver_error(
                    "MAP_NOT_INJECTIVE",
                    "Newton 更新使映射失去单调性（1 + hF″ ≤ 0），步长违反 h·λ ≤ 1/8 假设",
                    field="ma_1d",
                )
            if norm <= 1e3 * settings.newton_tol:
                # 舍入极限，残差已无法继续下降
                return _NewtonOutcome(log_rho=log_rho, iterations=iteration, residual=norm, path=path)
            raise solver_error(
                "NEWTON_STALLED",
                f"Newton 线搜索失败，残差停在 {norm:.3e}",
                field="ma_1d",
            )
    if norm <= settings.newton_tol:
        return _NewtonOutcome(log_rho=log_rho, iterations=settings.newton_max_iter, residual=norm, path=path)
    raise solver_error(
        "NEWTON_NOT_CONVERGED",
        f"Newton 在 {settings.newton_max_iter} 次内未收敛，最后残差 {norm:.3e}",
        field="ma_1d",
    )


def _map_transport(rho_next: DiscreteDensity, F: GridFunction, h: float) -> TransportResult:
    """
    由 F 构造步内传输：势 (−hF, (−hF)^c)，映射 x + h∇F，代价为映射代价 ½∫|h∇F|²ρ dμ（面平均）。
    """
    grid = rho_next.grid
    weighted = rho_next.values * rho_next.measure.weight.values
    cost = 0.0
    for axis in range(grid.dim):
        dx = grid.spacings[axis]
        face_weight = 0.5 * (weighted + np.roll(weighted, -1, axis=axis))
        face_velocity = h * (np.roll(F.values, -1, axis=axis) - F.values) / dx
        cost += 0.5 * deterministic_sum(face_weight * face_velocity * face_velocity) * grid.node_volume
    potential = GridFunction(grid, -h * F.values)
    coords = np.stack(grid.coordinates())
    transport_map = np.mod(coords + h * gradient_array(F.values, grid), grid.period)
    return TransportResult(
        cost=cost,
        potentials=(potential, c_transform(potential)),
        solver=SOLVER_MA_1D,
        transport_map=transport_map,
    )


def _solve_ma_1d(
    rho_prev: DiscreteDensity,
    h: float,
    spec: ProblemSpec,
    initial: Optional[np.ndarray] = None,
) -> Tuple[DiscreteDensity, _NewtonOutcome]:
    """一维 Monge–Ampère 步的密度解与 Newton 结果（含逐步迭代点）。"""
    if spec.grid.dim != 1:
        raise input_error("SOLVER_DIM_UNSUPPORTED", "ma_1d 仅支持一维网格", field="solver")
    start = time.perf_counter()
    guess = np.log(rho_prev.values.ravel()) if initial is None else initial
    try:
        outcome = _newton_ma_1d(rho_prev, h, spec, guess)
    except AppError:
        record_solver_run(SOLVER_MA_1D, "failed", time.perf_counter() - start)
        raise
    record_solver_run(SOLVER_MA_1D, "ok", time.perf_counter() - start, outcome.iterations)
    rho_next = DiscreteDensity.from_values(np.exp(outcome.log_rho).reshape(spec.grid.shape), spec.measure)
    return rho_next, outcome


def _iterate_objective(rho_prev: DiscreteDensity, log_rho: np.ndarray, h: float, spec: ProblemSpec) -> float:
    """Newton 迭代点归一化后的步目标：精确一维 ½W² + h·E。"""
    candidate = DiscreteDensity.from_values(np.exp(log_rho).reshape(spec.grid.shape), spec.measure)
    return solve_ot_1d(rho_prev, candidate).cost + h * free_energy(candidate, spec).total


# endregion
# ============================================

# ============================================
# region 熵正则近端映射
# ============================================


def _sinkhorn_step(
    rho_prev: DiscreteDensity,
    h: float,
    spec: ProblemSpec,
    eps: Optional[float],
) -> Tuple[DiscreteDensity, TransportResult, int, List[float], float]:
    """
    最小化 S_ε(ρ_prev, ρ) + h·E(ρ)：对 log ρ 做阻尼镜像下降 ρ ← ρ·exp(−ω(F + ∂S/∂ρ / h))，
    目标上升时 ω 减半（此后保持）。

    返回:
        (ρ_next, 传输结果, 外层迭代次数, 目标历史, ε)。
    """
    settings = get_settings()
    grid = spec.grid
    workspace = SinkhornWorkspace(grid, eps)
    a = workspace.masses(rho_prev)
    weight = spec.measure.weight.values.ravel() * grid.node_volume
    self_a = workspace.solve(a, a).entropic_cost
    start = time.perf_counter()

    def evaluate(log_rho: np.ndarray, warm=None):
        rho = DiscreteDensity.from_values(np.exp(log_rho - log_rho.max()).reshape(grid.shape), spec.measure)
        b = workspace.masses(rho)
        state = workspace.divergence(a, b, self_a, warm)
        energy = free_energy(rho, spec).total
        return rho, state, state.value + h * energy

    log_rho = np.log(np.maximum(rho_prev.values.ravel(), settings.density_floor))
    rho, state, objective = evaluate(log_rho)
    history = [objective]
    omega = settings.jko_damping
    iterations = 0
    try:
        while True:
            F = variation_field(rho, spec).values.ravel()
            phi = F + state.gradient / h
            masses = rho.values.ravel() * weight
            centered = phi - float(np.dot(masses, phi) / masses.sum())
            if float(np.max(np.abs(centered))) <= settings.jko_inner_tol:
                break
            if iterations >= settings.jko_max_outer:
                raise solver_error(
                    "JKO_NOT_CONVERGED",
                    f"JKO 内层在 {settings.jko_max_outer} 次迭代内未收敛，最后目标值 {objective:.12g}",
                    field="sinkhorn",
                )
            iterations += 1
            while True:
                candidate = np.log(rho.values.ravel()) - omega * centered
                trial_rho, trial_state, trial_objective = evaluate(candidate, state)
                if trial_objective <= objective:
                    rho, state, objective = trial_rho, trial_state, trial_objective
                    history.append(objective)
                    break
                omega *= 0.5
                if omega < 1e-12:
                    raise solver_error(
                        "JKO_NOT_CONVERGED",
                        f"阻尼系数退化，最后目标值 {objective:.12g}",
                        field="sinkhorn",
                    )
    except AppError:
        record_solver_run("jko_sinkhorn", "failed", time.perf_counter() - start, iterations)
        raise
    record_solver_run("jko_sinkhorn", "ok", time.perf_counter() - start, iterations)
    b = workspace.masses(rho)
    plan = workspace.plan(a, b, state.cross)
    transport = TransportResult(
        cost=max(state.value, 0.0),
        potentials=(GridFunction(grid, state.cross.f), GridFunction(grid, state.cross.g)),
        solver=SOLVER_SINKHORN,
        plan=plan if grid.size <= settings.lp_max_nodes else None,
        transport_map=barycentric_map(plan, grid),
        raw_cost=state.cross.entropic_cost,
        marginal_error=state.cross.marginal_error,
        iterations=state.cross.iterations,
        epsilon=workspace.eps,
    )
    return rho, transport, iterations, history, workspace.eps


# endregion
# ============================================

# ============================================
# region 残差诊断
# ============================================


def ma_residual(rho: DiscreteDensity, rho_prev: DiscreteDensity, h: float, spec: ProblemSpec) -> GridFunction:
    """
    Monge–Ampère 残差 ρ_prev(φ)v0(φ)det(dφ) − ρv0，φ = x + h∇F。
    一维为守恒型（像胞内的前一步质量 / dx），二维为逐点双线性插值与 det(I + h∇²F)；
    I + h∇²F 非正定的节点记录告警。

    参数:
        rho: 当前密度。
        rho_prev: 前一步密度。
        h: 时间步长（可为 0）。
        spec: 问题定义。
    返回:
        残差网格函数。
    """
    grid = spec.grid
    F = variation_field(rho, spec)
    v0 = spec.v0.values
    if grid.dim == 1:
        cells = CellMass(rho_prev.values.ravel() * v0.ravel(), grid)
        residual, left, right = _conservative_residual(np.log(rho.values.ravel()), cells, spec, h)
        if not _injective(left, right):
            logger.warning(json.dumps({"event": "ma_indefinite", "nodes": int(np.sum(right <= left))}))
        return GridFunction(grid, residual)
    hess = hessian_array(F.values, grid)
    jacobian = np.eye(grid.dim).reshape((grid.dim, grid.dim) + (1,) * grid.dim) + h * hess
    indefinite = int(np.sum(symmetric_eigen_min(jacobian) <= 0))
    if indefinite:
        logger.warning(json.dumps({"event": "ma_indefinite", "nodes": indefinite}))
    det = jacobian[0, 0] * jacobian[1, 1] - jacobian[0, 1] * jacobian[1, 0]
    points = np.stack(grid.coordinates()) + h * gradient_array(F.values, grid)
    pulled = interpolate_periodic(rho_prev.values * v0, grid, points)
    return GridFunction(grid, pulled * det - rho.values * v0)


def default_test_fields(grid: Grid) -> List[GridFunction]:
    """弱形式残差使用的测试函数：常数与每个轴的 sin/cos 2πx。"""
    fields = [GridFunction(grid, np.ones(grid.shape))]
    coords = grid.coordinates()
    for axis in range(grid.dim):
        phase = 2.0 * np.pi * coords[axis] / grid.period
        fields.append(GridFunction(grid, np.sin(phase)))
        fields.append(GridFunction(grid, np.cos(phase)))
    return fields


def weak_residual(
    rho_k: DiscreteDensity,
    rho_prev: DiscreteDensity,
    h: float,
    spec: ProblemSpec,
    xi: GridFunction,
) -> float:
    """
    弱形式残差 ∫[−Δξ + ⟨∇ξ, ∇(Ψ − 2 log v0)⟩]ρ_k dμ + (1/h)∫ξ(ρ_k − ρ_{k−1})dμ。

    参数:
        rho_k: 当前密度。
        rho_prev: 前一步密度。
        h: 时间步长。
        spec: 问题定义。
        xi: 光滑测试函数。
    返回:
        残差值。
    """
    ensure_positive(h, field="h")
    grid = spec.grid
    drift = gradient_array(spec.psi.values - 2.0 * np.log(spec.v0.values), grid)
    grad_xi = gradient_array(xi.values, grid)
    generator = -laplacian_array(xi.values, grid) + np.sum(grad_xi * drift, axis=0)
    stationary_part = integrate_array(generator * rho_k.values, spec.measure)
    # 质量差按节点质量直接相减，常数测试函数给出精确的质量守恒残差
    increment = integrate_array(xi.values * (rho_k.values - rho_prev.values), spec.measure)
    return stationary_part + increment / h


def weak_residual_bound(rho_k: DiscreteDensity, h: float, spec: ProblemSpec, xi: GridFunction) -> float:
    """弱形式残差的理论上界 ½‖∇²ξ‖∞·h·∫|∇F_k|²ρ_k dμ（不含离散化余量）。"""
    F = variation_field(rho_k, spec)
    grad_F = gradient_array(F.values, spec.grid)
    fisher = integrate_array(np.sum(grad_F * grad_F, axis=0) * rho_k.values, spec.measure)
    return 0.5 * matrix_field_sup_norm(hessian_array(xi.values, spec.grid)) * h * fisher


# endregion
# ============================================

# ============================================
# region 单步与轨迹
# ============================================


def _lambda_of(rho: DiscreteDensity, spec: ProblemSpec) -> float:
    return max_hessian_eigenvalue(variation_field(rho, spec).values, spec.grid)


def jko_step(
    rho_prev: DiscreteDensity,
    h: float,
    spec: ProblemSpec,
    solver: str = SOLVER_MA_1D,
    *,
    eps: Optional[float] = None,
) -> JkoStepResult:
    """
    一步 JKO：argmin_ρ ½d²(ρ_prev μ, ρμ) + h·E(ρ)。

    参数:
        rho_prev: 前一步密度（严格正）。
        h: 时间步长。
        spec: 问题定义。
        solver: ma_1d 或 sinkhorn。
        eps: sinkhorn 的熵正则参数。
    返回:
        JkoStepResult。
    """
    ensure_positive(float(h), field="h")
    if solver not in SOLVERS:
        raise input_error("SOLVER_UNKNOWN", f"未知的 JKO 求解器: {solver}", field="solver")
    if np.any(rho_prev.values <= 0):
        raise input_error("DENSITY_NOT_POSITIVE", "前一步密度必须严格为正", field="rho_prev")
    entropic_bias = 0.0
    if solver == SOLVER_MA_1D:
        rho_next, outcome = _solve_ma_1d(rho_prev, h, spec)
        iterations = outcome.iterations
        F = variation_field(rho_next, spec)
        transport = _map_transport(rho_next, F, h)
        energy = free_energy(rho_next, spec)
        history: Tuple[float, ...] = tuple(_iterate_objective(rho_prev, log_rho, h, spec) for log_rho in outcome.path)
    else:
        rho_next, transport, iterations, objectives, used_eps = _sinkhorn_step(rho_prev, h, spec, eps)
        history = tuple(objectives)
        energy = free_energy(rho_next, spec)
        entropic_bias = used_eps * sup_norm(laplacian_array(rho_next.values, spec.grid))
    objective = transport.cost + h * energy.total
    ma_max = sup_norm(ma_residual(rho_next, rho_prev, h, spec).values)
    weak_max = max(
        abs(weak_residual(rho_next, rho_prev, h, spec, xi)) for xi in default_test_fields(spec.grid)
    )
    lam = _lambda_of(rho_next, spec)
    record_jko_step()
    logger.info(
        json.dumps(
            {
                "event": "jko_step",
                "solver": solver,
                "h": h,
                "objective": objective,
                "cost": transport.cost,
                "energy": energy.total,
                "iterations": iterations,
                "ma_residual_max": ma_max,
            }
        )
    )
    return JkoStepResult(
        rho_next=rho_next,
        transport=transport,
        objective=objective,
        inner_iterations=iterations,
        ma_residual_max=ma_max,
        weak_residual_max=weak_max,
        energy=energy,
        lambda_value=lam,
        solver=solver,
        entropic_bias=entropic_bias,
        objective_history=history,
    )


def default_solver(spec: ProblemSpec) -> str:
    """一维默认 ma_1d，二维只能用 sinkhorn。"""
    return SOLVER_MA_1D if spec.grid.dim == 1 else SOLVER_SINKHORN


def run_flow(spec: ProblemSpec, solver: Optional[str] = None, *, eps: Optional[float] = None) -> FlowTrajectory:
    """
    从 ρ0 以 h = K/N 迭代 N 步 JKO。单步失败时不抛出，返回带 failure 的部分轨迹。

    参数:
        spec: 问题定义。
        solver: 内层求解器，缺省按维数选择。
        eps: sinkhorn 的熵正则参数。
    返回:
        FlowTrajectory。
    """
    chosen = solver or default_solver(spec)
    h = spec.h
    densities = [spec.rho0]
    lambdas = [_lambda_of(spec.rho0, spec)]
    steps: List[JkoStepResult] = []
    cap_violations: List[int] = []
    if h * lambdas[0] > LAMBDA_CAP:
        cap_violations.append(0)
    failure: Optional[ErrorDetail] = None
    for k in range(1, spec.N + 1):
        try:
            result = jko_step(densities[-1], h, spec, chosen, eps=eps)
        except AppError as exc:
            failure = exc.as_detail(f"step[{k}]")
            logger.error(json.dumps({"event": "flow_step", "step": k, "status": "failed", "code": exc.code}))
            break
        densities.append(result.rho_next)
        steps.append(result)
        lambdas.append(result.lambda_value)
        if h * result.lambda_value > LAMBDA_CAP:
            cap_violations.append(k)
        logger.info(json.dumps({"event": "flow_step", "step": k, "status": "ok", "lambda": result.lambda_value}))
    return FlowTrajectory(
        spec=spec,
        h=h,
        densities=densities,
        steps=steps,
        lambdas=lambdas,
        solver=chosen,
        failure=failure,
        cap_violations=cap_violations,
    )


def node_times(K: float, N: int) -> List[float]:
    """时间节点 kK/N（k = 0..N），末节点恰为 K。"""
    times = [K * k / N for k in range(N)]
    times.append(float(K))
    return times


def interpolate(traj: FlowTrajectory, t: float) -> DiscreteDensity:
    """
    分段常数插值 φ_t = ρ_k，t ∈ [kK/N, (k+1)K/N)，t = K 取 ρ_N。

    参数:
        traj: 轨迹。
        t: 时间，0 ≤ t ≤ K。
    返回:
        对应的密度。
    """
    K = traj.spec.K
    N = traj.spec.N
    if not math.isfinite(t) or t < 0 or t > K:
        raise input_error("TIME_OUT_OF_RANGE", f"t 必须位于 [0, {K}] 内，实际为 {t!r}", field="t")
    k = bisect_right(node_times(K, N), t) - 1
    if k >= len(traj.densities):
        raise input_error("TRAJECTORY_INCOMPLETE", f"轨迹只包含 {len(traj.densities)} 个密度，无法取第 {k} 步", field="t")
    return traj.densities[k]


# endregion
# ============================================

# ============================================
# region 延拓求解
# ============================================


def continuation_solve(
    spec: ProblemSpec,
    h: float,
    s_steps: int,
    *,
    lambda_bound: Optional[float] = None,
) -> ContinuationResult:
    """
    延拓法：目标 ρ_prev(s) ∝ ρ∞^{1−s}·ρ0^s，从 s=0 的闭式解 ρ∞ 出发，逐段热启动 Newton 至 s=1。
    每段核验 λ(s) 不越过 λ 二次不等式的较小正根（容差同估计记录）。

    参数:
        spec: 问题定义（一维）。
        h: 时间步长，需满足 h·λ0 ≤ 1/8。
        s_steps: s 的等分段数。
        lambda_bound: λ(s) 的上界，缺省由 continuation_lambda_bound 计算。
    返回:
        ContinuationResult。
    """
    from .estimates import compute_constants, continuation_lambda_bound, instantiate_C

    ensure_positive(float(h), field="h")
    if spec.grid.dim != 1:
        raise input_error("SOLVER_DIM_UNSUPPORTED", "延拓求解仅支持一维", field="dim")
    if int(s_steps) < 1:
        raise input_error("S_STEPS_INVALID", f"s_steps 必须为正整数，实际为 {s_steps!r}", field="s_steps")
    lambda0 = _lambda_of(spec.rho0, spec)
    if h * lambda0 > LAMBDA_CAP:
        raise input_error(
            "CONTINUATION_HYPOTHESIS",
            f"h·λ0 = {h * lambda0:.4f} 超过 1/8，延拓假设不成立",
            field="h",
        )
    if lambda_bound is None:
        lambda_bound = continuation_lambda_bound(h, lambda0, instantiate_C(compute_constants(spec), h))
    settings = get_settings()
    spacing = spec.grid.spacing
    rho_inf = stationary_density(spec)
    log_inf = np.log(rho_inf.values)
    log_target = np.log(spec.rho0.values)
    current = rho_inf
    s_values = [0.0]
    lambdas = [_lambda_of(rho_inf, spec)]
    start = time.perf_counter()
    for j in range(1, int(s_steps) + 1):
        s = j / int(s_steps)
        target = DiscreteDensity.from_values(np.exp((1.0 - s) * log_inf + s * log_target), spec.measure)
        try:
            current, _ = _solve_ma_1d(target, h, spec, initial=np.log(current.values.ravel()))
        except AppError as exc:
            record_solver_run("continuation", "failed", time.perf_counter() - start)
            raise solver_error(
                "CONTINUATION_FAILED",
                f"延拓在 s = {s:.4f} 失败（{exc.code}）；最后成功的 s = {s_values[-1]:.4f}，λ(s) = {lambdas[-1]:.6g}",
                field="continuation",
            ) from exc
        lam = _lambda_of(current, spec)
        scale = max(1.0, abs(lam), abs(lambda_bound)) if math.isfinite(lambda_bound) else 1.0
        if lam - lambda_bound > (settings.estimate_rel_slack + settings.estimate_allowance * spacing * spacing) * scale:
            record_solver_run("continuation", "failed", time.perf_counter() - start, j)
            raise solver_error(
                "CONTINUATION_LAMBDA_UNBOUNDED",
                f"λ(s) = {lam:.6g} 在 s = {s:.4f} 越过上界 {lambda_bound:.6g}；最后有界的 s = {s_values[-1]:.4f}",
                field="continuation",
            )
        s_values.append(s)
        lambdas.append(lam)
        logger.info(json.dumps({"event": "continuation_stage", "s": s, "lambda": lam, "lambda_bound": lambda_bound}))
    record_solver_run("continuation", "ok", time.perf_counter() - start, int(s_steps))
    return ContinuationResult(density=current, s_values=s_values, lambdas=lambdas, lambda_bound=lambda_bound)


def trajectory_masses(traj: FlowTrajectory) -> Sequence[float]:
    """轨迹各密度的 μ 质量。"""
    return [rho.mass for rho in traj.densities]


# endregion
# ============================================
