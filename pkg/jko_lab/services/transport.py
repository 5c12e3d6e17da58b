"""
文件名: transport.py
描述: 环面上的最优传输：c-变换、LP 精确解、一维圆周精确解与对数域 Sinkhorn。
主要功能:
    - DiscreteDensity / TransportResult 数据结构。
    - c_transform、solve_ot_lp（POT 网络单纯形）、solve_ot_1d（圆周分位数匹配）。
    - sinkhorn（去偏 Sinkhorn 散度、对偶势、重心映射）与 SinkhornWorkspace。
    - map_from_potential、pushforward、duality_gap。
依赖: numpy, scipy, POT
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import ot
from scipy.special import logsumexp

from ..config import get_settings
from ..errors import AppError, ensure_positive, input_error, solver_error
from .grid import (
    Grid,
    GridFunction,
    Measure,
    cost_matrix,
    cost_rows,
    deterministic_sum,
    gradient_array,
    integrate_array,
    splat_periodic,
    wrap_displacement,
)
from .metrics import record_solver_run

logger = logging.getLogger("jko_lab.transport")

# ============================================
# region 数据结构
# ============================================


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    """相对测度 μ 的概率密度，∫ρ dμ = 1。"""

    grid: Grid
    rho: GridFunction
    measure: Measure

    def __post_init__(self) -> None:
        if self.rho.grid != self.grid or self.measure.grid != self.grid:
            raise input_error("GRID_MISMATCH", "密度、测度与网格不一致", field="grid")
        values = self.rho.values
        if np.any(values < 0):
            bad = int(np.flatnonzero(values.ravel() < 0)[0])
            raise input_error("DENSITY_NEGATIVE", f"密度在节点 {bad} 处为负", field="rho")
        mass = integrate_array(values, self.measure)
        if abs(mass - 1.0) > get_settings().mass_tol:
            raise input_error("DENSITY_MASS_INVALID", f"密度质量为 {mass!r}，应为 1", field="rho")

    @property
    def values(self) -> np.ndarray:
        return self.rho.values

    @property
    def masses(self) -> np.ndarray:
        """节点质量 ρ·v0·节点体积。"""
        return self.rho.values * self.measure.weight.values * self.grid.node_volume

    @property
    def mass(self) -> float:
        return integrate_array(self.rho.values, self.measure)

    @classmethod
    def from_values(cls, values: np.ndarray, measure: Measure, *, normalize: bool = True) -> "DiscreteDensity":
        """
        由节点值构建密度。

        参数:
            values: 节点密度值（相对 μ）。
            measure: 参考测度。
            normalize: 是否归一化到单位质量。
        返回:
            DiscreteDensity 实例。
        """
        grid = measure.grid
        array = np.array(values, dtype=float).reshape(grid.shape)
        if normalize:
            mass = integrate_array(array, measure)
            if not math.isfinite(mass) or mass <= 0:
                raise input_error("DENSITY_MASS_INVALID", f"密度质量为 {mass!r}，无法归一化", field="rho")
            array = array / mass
        return cls(grid, GridFunction(grid, array), measure)

    @classmethod
    def from_masses(cls, masses: np.ndarray, measure: Measure) -> "DiscreteDensity":
        """由节点质量构建密度（质量除以 v0·节点体积）。"""
        weight = measure.weight.values * measure.node_volume
        return cls.from_values(np.asarray(masses, dtype=float).reshape(measure.grid.shape) / weight, measure)


@dataclass(frozen=True, eq=False)
class TransportResult:
    """
    一次最优传输求解结果。cost 为代价 ½d² 下的 Kantorovich 值。
    potentials 为 (f, f^c)，f 对应第一个密度；从文件恢复的结果可能不含势函数。
    """

    cost: float
    potentials: Optional[Tuple[GridFunction, GridFunction]]
    solver: str
    plan: Optional[np.ndarray] = None
    transport_map: Optional[np.ndarray] = None
    raw_cost: Optional[float] = None
    marginal_error: float = 0.0
    iterations: int = 0
    epsilon: Optional[float] = None
    slack: float = 0.0


# endregion
# ============================================

# ============================================
# region 公共辅助
# ============================================


def _common_grid(rho_a: DiscreteDensity, rho_b: DiscreteDensity) -> Grid:
    """校验两个密度位于同一网格。"""
    if rho_a.grid != rho_b.grid:
        raise input_error("GRID_MISMATCH", "两个密度的网格不一致", field="grid")
    return rho_a.grid


def _dot(x: np.ndarray, y: np.ndarray) -> float:
    return deterministic_sum(np.asarray(x).ravel() * np.asarray(y).ravel())


def _log_event(payload: dict) -> None:
    logger.info(json.dumps(payload))


def barycentric_map(plan: np.ndarray, grid: Grid) -> np.ndarray:
    """
    由传输计划计算重心映射，位移取环面最小像。

    参数:
        plan: size×size 的传输计划。
        grid: 网格。
    返回:
        形状 (dim, *shape) 的映射坐标（已模周期）。
    """
    row_mass = plan.sum(axis=1)
    safe = np.where(row_mass > 0, row_mass, 1.0)
    idx = grid.index_arrays()
    out = []
    for axis in range(grid.dim):
        coords = idx[axis] * grid.spacings[axis]
        displacement = wrap_displacement(coords[None, :] - coords[:, None], grid.period)
        mean = np.where(row_mass > 0, (plan * displacement).sum(axis=1) / safe, 0.0)
        out.append(np.mod(coords + mean, grid.period).reshape(grid.shape))
    return np.stack(out)


def dual_value(potentials: Tuple[GridFunction, GridFunction], rho_a: DiscreteDensity, rho_b: DiscreteDensity) -> float:
    """对偶目标 Σ f·mass_a + Σ f^c·mass_b。"""
    f, fc = potentials
    return _dot(f.values, rho_a.masses) + _dot(fc.values, rho_b.masses)


def duality_gap(result: TransportResult, rho_a: DiscreteDensity, rho_b: DiscreteDensity) -> float:
    """
    原始代价与对偶目标之差。

    参数:
        result: 传输结果（需含势函数）。
        rho_a: 源密度。
        rho_b: 目标密度。
    返回:
        原始值 − 对偶值。
    """
    if result.potentials is None:
        raise input_error("POTENTIALS_MISSING", "传输结果不含对偶势", field="potentials")
    primal = result.cost
    if result.plan is not None:
        primal = _dot(result.plan, cost_matrix(rho_a.grid))
    return primal - dual_value(result.potentials, rho_a, rho_b)


# endregion
# ============================================

# ============================================
# region c-变换
# ============================================


def c_transform_with_argmin(values: np.ndarray, grid: Grid, chunk: int = 512) -> Tuple[np.ndarray, np.ndarray]:
    """
    离散 c-变换 f^c(x) = min_y ½d²(x,y) − f(y)，按行分块计算。
    并列最小值取行主序最小编号（np.argmin 的首次出现）。

    参数:
        values: 网格上的 f 值。
        grid: 网格。
        chunk: 每块行数。
    返回:
        (f^c 值数组, argmin 节点编号数组)。
    """
    flat = np.asarray(values, dtype=float).ravel()
    out = np.empty(grid.size)
    arg = np.empty(grid.size, dtype=np.int64)
    for start in range(0, grid.size, chunk):
        rows = np.arange(start, min(grid.size, start + chunk))
        block = cost_rows(grid, rows) - flat[None, :]
        best = np.argmin(block, axis=1)
        arg[rows] = best
        out[rows] = block[np.arange(len(rows)), best]
    return out.reshape(grid.shape), arg


def c_transform(f: GridFunction) -> GridFunction:
    """
    离散 c-变换。

    参数:
        f: 网格函数。
    返回:
        f^c 网格函数。
    """
    values, _ = c_transform_with_argmin(f.values, f.grid)
    return GridFunction(f.grid, values)


# endregion
# ============================================

# ============================================
# region LP 精确解
# ============================================


def solve_ot_lp(rho_a: DiscreteDensity, rho_b: DiscreteDensity) -> TransportResult:
    """
    离散 Kantorovich 问题的精确解（POT 网络单纯形），作为其余求解器的基准。

    参数:
        rho_a: 源密度。
        rho_b: 目标密度。
    返回:
        含计划、代价、c-凹对偶势与重心映射的 TransportResult。
    """
    settings = get_settings()
    grid = _common_grid(rho_a, rho_b)
    if grid.size > settings.lp_max_nodes:
        raise input_error(
            "LP_GRID_TOO_LARGE",
            f"LP 求解仅支持不超过 {settings.lp_max_nodes} 个节点，实际为 {grid.size}",
            field="grid",
        )
    a = rho_a.masses.ravel().copy()
    b = rho_b.masses.ravel().copy()
    if abs(a.sum() - b.sum()) > settings.marginal_tol:
        raise input_error("MASS_UNBALANCED", f"两侧质量不一致: {a.sum()!r} vs {b.sum()!r}", field="masses")
    b = b * (a.sum() / b.sum())
    cost = cost_matrix(grid)
    start = time.perf_counter()
    plan, log = ot.emd(a, b, cost, numItermax=10_000_000, log=True)
    duration = time.perf_counter() - start
    if int(log["result_code"]) != 1:
        record_solver_run("lp", "failed", duration)
        raise solver_error("LP_NOT_OPTIMAL", f"网络单纯形未达到最优: {log['warning']}", field="lp")
    plan = np.asarray(plan, dtype=float)
    # 只用目标支撑上的对偶值，零质量节点的对偶值不受约束
    duals = np.where(b > 0, np.asarray(log["v"], dtype=float), -np.inf)
    f_values, _ = c_transform_with_argmin(duals, grid)
    f = GridFunction(grid, f_values)
    fc = c_transform(f)
    marginal = max(
        float(np.max(np.abs(plan.sum(axis=1) - a))),
        float(np.max(np.abs(plan.sum(axis=0) - b))),
    )
    value = max(_dot(plan, cost), 0.0)
    record_solver_run("lp", "ok", duration)
    _log_event({"event": "ot_solve", "solver": "lp", "nodes": grid.size, "cost": value, "duration_ms": int(duration * 1000)})
    return TransportResult(
        cost=value,
        potentials=(f, fc),
        solver="lp",
        plan=plan,
        transport_map=barycentric_map(plan, grid),
        marginal_error=marginal,
    )


# endregion
# ============================================

# ============================================
# region 一维圆周精确解
# ============================================


def _cumulative(weights: np.ndarray) -> np.ndarray:
    """归一化累积分布，末项精确为 1。"""
    cum = np.cumsum(weights)
    cum = cum / cum[-1]
    cum[-1] = 1.0
    return cum


def _matching_segments(
    cum_a: np.ndarray,
    cum_b: np.ndarray,
    theta: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    分位数匹配 t ↦ (F⁻¹(t), G⁻¹(t+θ)) 在 t∈[0,1) 上的分段。

    参数:
        cum_a: 源累积分布。
        cum_b: 目标累积分布。
        theta: 质量旋转偏移。
    返回:
        (段长, 源节点, 目标节点, 目标的提升圈数)。
    """
    m = len(cum_a)
    shifted = np.concatenate([cum_b - theta + k for k in (-2, -1, 0, 1, 2)])
    candidates = np.concatenate([[0.0, 1.0], cum_a, shifted])
    cuts = np.unique(candidates[(candidates >= 0.0) & (candidates <= 1.0)])
    lengths = np.diff(cuts)
    keep = lengths > 0
    mids = (0.5 * (cuts[:-1] + cuts[1:]))[keep]
    lengths = lengths[keep]
    src = np.minimum(np.searchsorted(cum_a, mids, side="left"), m - 1)
    lifted = mids + theta
    laps = np.floor(lifted)
    dst = np.minimum(np.searchsorted(cum_b, lifted - laps, side="left"), m - 1)
    return lengths, src, dst, laps


def _rotation_cost(cum_a: np.ndarray, cum_b: np.ndarray, nodes: np.ndarray, period: float, theta: float) -> float:
    """旋转偏移 θ 下的提升二次代价 ½∫(F⁻¹ − G⁻¹(·+θ))²，关于 θ 凸。"""
    lengths, src, dst, laps = _matching_segments(cum_a, cum_b, theta)
    gap = nodes[src] - (nodes[dst] + laps * period)
    return 0.5 * float(np.dot(lengths, gap * gap))


def _optimal_rotation(cum_a: np.ndarray, cum_b: np.ndarray, nodes: np.ndarray, period: float) -> float:
    """黄金分割搜索 θ∈[−1,1] 至宽度 1e-12，再吸附到邻近的分段断点。"""
    lo, hi = -1.0, 1.0
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - ratio * (hi - lo)
    x2 = lo + ratio * (hi - lo)
    c1 = _rotation_cost(cum_a, cum_b, nodes, period, x1)
    c2 = _rotation_cost(cum_a, cum_b, nodes, period, x2)
    while hi - lo > 1e-12:
        if c1 <= c2:
            hi, x2, c2 = x2, x1, c1
            x1 = hi - ratio * (hi - lo)
            c1 = _rotation_cost(cum_a, cum_b, nodes, period, x1)
        else:
            lo, x1, c1 = x1, x2, c2
            x2 = lo + ratio * (hi - lo)
            c2 = _rotation_cost(cum_a, cum_b, nodes, period, x2)
    best = 0.5 * (lo + hi)
    breaks = (cum_b[None, :] - cum_a[:, None]).ravel()
    breaks = np.concatenate([breaks + k for k in (-1.0, 0.0, 1.0)])
    near = breaks[np.abs(breaks - best) <= 1e-9]
    candidates = [best, lo, hi] + [float(v) for v in near]
    costs = [_rotation_cost(cum_a, cum_b, nodes, period, c) for c in candidates]
    return candidates[int(np.argmin(costs))]


def _staircase_potentials(
    src: np.ndarray,
    dst: np.ndarray,
    cost: np.ndarray,
    support_a: np.ndarray,
    grid: Grid,
) -> Tuple[GridFunction, GridFunction]:
    """
    沿阶梯支撑按互补松弛传播对偶势，再用 c-变换闭合为 (f, f^c)。

    参数:
        src: 各段源节点（按 t 排序）。
        dst: 各段目标节点。
        cost: 环面代价矩阵。
        support_a: 源质量为正的节点掩码。
        grid: 网格。
    返回:
        c-凹对偶势对。
    """
    m = grid.size
    f = np.full(m, np.nan)
    g = np.full(m, np.nan)
    prev_dst = None
    for i, j in zip(src.tolist(), dst.tolist()):
        known_f = not math.isnan(f[i])
        known_g = not math.isnan(g[j])
        if known_f and not known_g:
            g[j] = cost[i, j] - f[i]
        elif known_g and not known_f:
            f[i] = cost[i, j] - g[j]
        elif not known_f and not known_g:
            f[i] = 0.0 if prev_dst is None else cost[i, prev_dst] - g[prev_dst]
            g[j] = cost[i, j] - f[i]
        prev_dst = j
    rows = np.flatnonzero(support_a & ~np.isnan(f))
    g_full = np.min(cost[rows, :] - f[rows, None], axis=0)
    f_values, _ = c_transform_with_argmin(g_full, grid)
    potential = GridFunction(grid, f_values)
    return potential, c_transform(potential)


def solve_ot_1d(rho_a: DiscreteDensity, rho_b: DiscreteDensity) -> TransportResult:
    """
    一维圆周上的精确最优传输：对质量旋转偏移 θ 最小化提升分位数匹配的二次代价，
    读取单调重排计划。

    参数:
        rho_a: 源密度。
        rho_b: 目标密度。
    返回:
        TransportResult（计划、代价、对偶势与重心映射）。
    """
    grid = _common_grid(rho_a, rho_b)
    if grid.dim != 1:
        raise input_error("SOLVER_DIM_UNSUPPORTED", f"exact1d 仅支持一维，实际为 {grid.dim} 维", field="dim")
    start = time.perf_counter()
    a = rho_a.masses.ravel()
    b = rho_b.masses.ravel()
    total = float(a.sum())
    nodes = grid.axis_nodes(0)
    cum_a = _cumulative(a)
    cum_b = _cumulative(b)
    theta = _optimal_rotation(cum_a, cum_b, nodes, grid.period)
    lengths, src, dst, laps = _matching_segments(cum_a, cum_b, theta)
    gap = nodes[src] - (nodes[dst] + laps * grid.period)
    value = 0.5 * total * deterministic_sum(lengths * gap * gap)
    plan = np.zeros((grid.size, grid.size))
    np.add.at(plan, (src, dst), lengths * total)
    cost = cost_matrix(grid)
    potentials = _staircase_potentials(src, dst, cost, a > 0, grid)
    marginal = max(
        float(np.max(np.abs(plan.sum(axis=1) - a))),
        float(np.max(np.abs(plan.sum(axis=0) - b))),
    )
    duration = time.perf_counter() - start
    record_solver_run("exact1d", "ok", duration)
    _log_event({"event": "ot_solve", "solver": "exact1d", "nodes": grid.size, "cost": value, "theta": theta})
    return TransportResult(
        cost=max(value, 0.0),
        potentials=potentials,
        solver="exact1d",
        plan=plan,
        transport_map=barycentric_map(plan, grid),
        marginal_error=marginal,
    )


# endregion
# ============================================

# ============================================
# region Sinkhorn
# ============================================


@dataclass(frozen=True, eq=False)
class SinkhornSolution:
    """单次熵正则问题的对偶解，entropic_cost 为 OT_ε。"""

    f: np.ndarray
    g: np.ndarray
    entropic_cost: float
    marginal_error: float
    iterations: int


class SinkhornWorkspace:
    """
    固定网格与 ε 的对数域 Sinkhorn 工作区，缓存代价矩阵并支持热启动。
    熵项相对 a⊗b，收敛时 OT_ε = Σ a f + Σ b g。
    """

    def __init__(self, grid: Grid, eps: Optional[float] = None, tol: Optional[float] = None) -> None:
        settings = get_settings()
        self.grid = grid
        self.eps = float(eps) if eps is not None else settings.sinkhorn_eps_factor * grid.diameter ** 2
        self.tol = float(tol) if tol is not None else settings.sinkhorn_tol
        ensure_positive(self.eps, field="epsilon")
        ensure_positive(self.tol, field="tol")
        self.max_iter = settings.sinkhorn_max_iter
        self.annealing = settings.sinkhorn_annealing
        self.floor = settings.density_floor
        self.cost = cost_matrix(grid)

    def masses(self, density: DiscreteDensity) -> np.ndarray:
        """施加密度下限后的归一化节点质量。"""
        weight = (density.measure.weight.values * self.grid.node_volume).ravel()
        floored = np.maximum(density.values.ravel(), self.floor) * weight
        return floored / floored.sum()

    def _update_f(self, g: np.ndarray, log_b: np.ndarray, eps: float) -> np.ndarray:
        return -eps * logsumexp(log_b[None, :] + (g[None, :] - self.cost) / eps, axis=1)

    def _update_g(self, f: np.ndarray, log_a: np.ndarray, eps: float) -> np.ndarray:
        return -eps * logsumexp(log_a[:, None] + (f[:, None] - self.cost) / eps, axis=0)

    def _iterate(
        self,
        a: np.ndarray,
        b: np.ndarray,
        eps: float,
        tol: float,
        init: Optional[Tuple[np.ndarray, np.ndarray]],
    ) -> Tuple[np.ndarray, np.ndarray, float, int]:
        log_a = np.log(a)
        log_b = np.log(b)
        f = np.zeros(len(a)) if init is None else np.array(init[0], dtype=float)
        g = self._update_g(f, log_a, eps)
        error = math.inf
        for iteration in range(1, self.max_iter + 1):
            f_next = self._update_f(g, log_b, eps)
            if not np.all(np.isfinite(f_next)):
                raise solver_error("SINKHORN_NAN", f"Sinkhorn 势函数在第 {iteration} 次迭代出现 NaN", field="sinkhorn")
            # 行边缘 a_i·exp((f_i − f_next_i)/ε)
            error = float(np.max(np.abs(a * np.expm1((f - f_next) / eps))))
            if error <= tol:
                return f, g, error, iteration
            f = f_next
            g = self._update_g(f, log_a, eps)
        raise solver_error(
            "SINKHORN_NOT_CONVERGED",
            f"Sinkhorn 在 {self.max_iter} 次迭代内未收敛，最后边缘误差 {error:.3e}",
            field="sinkhorn",
        )

    def solve(
        self,
        a: np.ndarray,
        b: np.ndarray,
        init: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ) -> SinkhornSolution:
        """
        求解 OT_ε(a, b)。

        参数:
            a: 源节点质量（正，和为 1）。
            b: 目标节点质量。
            init: 热启动势 (f, g)。
        返回:
            SinkhornSolution。
        """
        iterations = 0
        if self.annealing and init is None:
            stage_eps = max(self.grid.diameter ** 2, self.eps)
            while stage_eps > self.eps:
                f, g, _, used = self._iterate(a, b, stage_eps, max(self.tol, 1e-6), init)
                iterations += used
                init = (f, g)
                stage_eps = max(stage_eps / 2.0, self.eps)
        f, g, error, used = self._iterate(a, b, self.eps, self.tol, init)
        iterations += used
        return SinkhornSolution(
            f=f,
            g=g,
            entropic_cost=_dot(a, f) + _dot(b, g),
            marginal_error=error,
            iterations=iterations,
        )

    def plan(self, a: np.ndarray, b: np.ndarray, solution: SinkhornSolution) -> np.ndarray:
        """由对偶势重建传输计划。"""
        log_plan = (
            np.log(a)[:, None]
            + np.log(b)[None, :]
            + (solution.f[:, None] + solution.g[None, :] - self.cost) / self.eps
        )
        return np.exp(log_plan)

    def divergence(
        self,
        a: np.ndarray,
        b: np.ndarray,
        self_a: float,
        warm: Optional["DivergenceState"] = None,
    ) -> "DivergenceState":
        """
        去偏散度 S_ε(a, b) 及其关于 b 的一阶变分，a 的自代价由调用方缓存。

        参数:
            a: 源节点质量。
            b: 目标节点质量。
            self_a: OT_ε(a, a)。
            warm: 上一次的状态，用于热启动。
        返回:
            DivergenceState。
        """
        cross = self.solve(a, b, None if warm is None else (warm.cross.f, warm.cross.g))
        own = self.solve(b, b, None if warm is None else (warm.own.f, warm.own.g))
        value = cross.entropic_cost - 0.5 * self_a - 0.5 * own.entropic_cost
        # 对称问题的 f_bb 与 g_bb 相同，取平均抵消迭代残差
        gradient = cross.g - 0.5 * (own.f + own.g)
        return DivergenceState(value=value, gradient=gradient, cross=cross, own=own)


@dataclass(frozen=True, eq=False)
class DivergenceState:
    """去偏散度值、关于第二个参数节点质量的梯度以及两组对偶解。"""

    value: float
    gradient: np.ndarray
    cross: SinkhornSolution
    own: SinkhornSolution


def sinkhorn_gradient(
    rho_a: DiscreteDensity,
    rho_b: DiscreteDensity,
    eps: Optional[float] = None,
    tol: Optional[float] = None,
) -> GridFunction:
    """
    S_ε(ρa, ρb) 关于 ρb 的一阶变分（相对 μ 的 L² 对偶），即 g_ab − ½(f_bb + g_bb)。

    参数:
        rho_a: 固定密度。
        rho_b: 变分所在的密度。
        eps: 熵正则参数。
        tol: 边缘误差容差。
    返回:
        网格函数形式的一阶变分。
    """
    grid = _common_grid(rho_a, rho_b)
    workspace = SinkhornWorkspace(grid, eps, tol)
    a = workspace.masses(rho_a)
    b = workspace.masses(rho_b)
    self_a = workspace.solve(a, a).entropic_cost
    state = workspace.divergence(a, b, self_a)
    return GridFunction(grid, state.gradient)


def sinkhorn(
    rho_a: DiscreteDensity,
    rho_b: DiscreteDensity,
    eps: Optional[float] = None,
    tol: Optional[float] = None,
) -> TransportResult:
    """
    对数域 Sinkhorn，返回去偏代价 S_ε = OT_ε(a,b) − ½OT_ε(a,a) − ½OT_ε(b,b)。

    参数:
        rho_a: 源密度。
        rho_b: 目标密度。
        eps: 熵正则参数，默认 1e-3·diam²。
        tol: 最大边缘误差容差。
    返回:
        TransportResult（raw_cost 为 OT_ε）。
    """
    grid = _common_grid(rho_a, rho_b)
    settings = get_settings()
    workspace = SinkhornWorkspace(grid, eps, tol)
    start = time.perf_counter()
    a = workspace.masses(rho_a)
    b = workspace.masses(rho_b)
    try:
        cross = workspace.solve(a, b)
        iterations = cross.iterations
        if np.array_equal(a, b):
            self_a = self_b = cross.entropic_cost
        else:
            solved_a = workspace.solve(a, a)
            solved_b = workspace.solve(b, b)
            self_a = solved_a.entropic_cost
            self_b = solved_b.entropic_cost
            iterations += solved_a.iterations + solved_b.iterations
    except AppError:
        record_solver_run("sinkhorn", "failed", time.perf_counter() - start)
        raise
    debiased = cross.entropic_cost - 0.5 * self_a - 0.5 * self_b
    plan = workspace.plan(a, b, cross)
    duration = time.perf_counter() - start
    record_solver_run("sinkhorn", "ok", duration, iterations)
    _log_event(
        {
            "event": "sinkhorn",
            "nodes": grid.size,
            "epsilon": workspace.eps,
            "iterations": iterations,
            "marginal_error": cross.marginal_error,
            "debiased_cost": debiased,
        }
    )
    return TransportResult(
        cost=max(debiased, 0.0),
        potentials=(GridFunction(grid, cross.f), GridFunction(grid, cross.g)),
        solver="sinkhorn",
        plan=plan if grid.size <= settings.lp_max_nodes else None,
        transport_map=barycentric_map(plan, grid),
        raw_cost=cross.entropic_cost,
        marginal_error=cross.marginal_error,
        iterations=iterations,
        epsilon=workspace.eps,
        slack=workspace.eps * math.log(1.0 / (float(a.min()) * float(b.min()))),
    )


# endregion
# ============================================

# ============================================
# region 映射与推前
# ============================================


def map_from_potential(f: GridFunction) -> np.ndarray:
    """
    由对偶势构造映射 x ↦ x − ∇f(x)，坐标模周期。

    参数:
        f: 对偶势。
    返回:
        形状 (dim, *shape) 的映射坐标。
    """
    grid = f.grid
    grad = gradient_array(f.values, grid)
    coords = grid.coordinates()
    return np.stack([np.mod(coords[a] - grad[a], grid.period) for a in range(grid.dim)])


def pushforward(rho: DiscreteDensity, transport_map: np.ndarray) -> DiscreteDensity:
    """
    质量守恒的推前：每个节点质量按多线性权重周期沉积到映射点附近节点。

    参数:
        rho: 源密度。
        transport_map: 形状 (dim, *shape) 的映射坐标。
    返回:
        推前后的密度（相对同一测度）。
    """
    grid = rho.grid
    points = np.asarray(transport_map, dtype=float)
    if not np.all(np.isfinite(points)):
        raise input_error("MAP_NOT_FINITE", "映射含非有限值", field="map")
    deposited = splat_periodic(rho.masses, grid, points)
    return DiscreteDensity.from_masses(deposited, rho.measure)


def identity_map(grid: Grid) -> np.ndarray:
    """恒等映射的坐标数组。"""
    return np.stack(grid.coordinates())


def list_solvers() -> List[str]:
    """命令行可选的传输求解器名称。"""
    return ["lp", "exact1d", "sinkhorn"]


# endregion
# ============================================
