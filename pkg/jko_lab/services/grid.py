"""
文件名: grid.py
描述: 平坦环面 T^n (n=1,2) 上的均匀周期网格、网格函数与有限差分算子。
主要功能:
    - Grid / GridFunction / Measure 三个不可变数据结构。
    - 环面距离、二阶中心差分梯度/Hessian/Laplacian、三阶导数张量。
    - 对测度 μ = v0 dx 的求积，以及周期多线性插值。
依赖: numpy
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from ..config import get_settings
from ..errors import input_error

# ============================================
# region 数据结构
# ============================================


@dataclass(frozen=True)
class Grid:
    """均匀周期网格，所有轴共享同一周期。"""

    dim: int
    resolution: Tuple[int, ...]
    period: float = 1.0

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def spacings(self) -> Tuple[float, ...]:
        return tuple(self.period / m for m in self.resolution)

    @property
    def spacing(self) -> float:
        """最大网格步长，用于离散化误差容差。"""
        return max(self.spacings)

    @property
    def node_volume(self) -> float:
        return float(np.prod(self.spacings))

    @property
    def diameter(self) -> float:
        """环面直径 sqrt(n)·L/2。"""
        return math.sqrt(self.dim) * self.period / 2.0

    def axis_nodes(self, axis: int) -> np.ndarray:
        """
        返回单轴节点坐标 i·spacing。

        参数:
            axis: 轴编号。
        返回:
            一维坐标数组。
        """
        m = self.resolution[axis]
        return np.arange(m, dtype=float) * self.spacings[axis]

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """
        返回 ij 索引顺序的坐标网格。

        返回:
            每个轴一个形状为 shape 的坐标数组。
        """
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """
        返回行主序展开的节点坐标。

        返回:
            形状 (size, dim) 的数组。
        """
        return np.stack([c.ravel() for c in self.coordinates()], axis=-1)

    def index_arrays(self) -> Tuple[np.ndarray, ...]:
        """
        返回行主序展开的整数节点索引。

        返回:
            每个轴一个长度为 size 的整数数组。
        """
        return np.unravel_index(np.arange(self.size), self.shape)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """网格上的实值标量场，values 为只读的 float64 数组。"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        array = np.array(self.values, dtype=float)
        if array.size != self.grid.size:
            raise input_error(
                "FIELD_SHAPE_MISMATCH",
                f"网格函数长度 {array.size} 与网格节点数 {self.grid.size} 不一致",
                field="values",
            )
        array = array.reshape(self.grid.shape)
        if not np.all(np.isfinite(array)):
            bad = int(np.flatnonzero(~np.isfinite(array.ravel()))[0])
            raise input_error("FIELD_NOT_FINITE", f"网格函数在节点 {bad} 处非有限", field="values")
        array.setflags(write=False)
        object.__setattr__(self, "values", array)

    def flat(self) -> np.ndarray:
        """按行主序展开的只读视图。"""
        return self.values.ravel()

    def with_values(self, values: np.ndarray) -> "GridFunction":
        """同一网格上的新网格函数。"""
        return GridFunction(self.grid, values)


@dataclass(frozen=True, eq=False)
class Measure:
    """参考测度 μ = v0 dx^n。"""

    grid: Grid
    weight: GridFunction
    total_mass: float = field(init=False)

    def __post_init__(self) -> None:
        w = self.weight.values
        if np.any(w <= 0):
            bad = int(np.flatnonzero(w.ravel() <= 0)[0])
            raise input_error("WEIGHT_NOT_POSITIVE", f"测度权重 v0 在节点 {bad} 处非正", field="v0")
        object.__setattr__(self, "total_mass", deterministic_sum(w) * self.grid.node_volume)

    @property
    def node_volume(self) -> float:
        return self.grid.node_volume

    @classmethod
    def lebesgue(cls, grid: Grid) -> "Measure":
        """权重恒为 1 的 Lebesgue 测度。"""
        return cls(grid, GridFunction(grid, np.ones(grid.shape)))


VectorField = Tuple[GridFunction, ...]

# endregion
# ============================================

# ============================================
# region 网格构建与环面距离
# ============================================


def build_grid(dim: int, resolution: Union[int, Sequence[int]], period: float = 1.0) -> Grid:
    """
    构建均匀周期网格。

    参数:
        dim: 维数，仅支持 1 或 2。
        resolution: 每轴节点数（整数表示各轴相同）。
        period: 周期 L。
    返回:
        Grid 实例。
    """
    if dim not in (1, 2):
        raise input_error("GRID_DIM_UNSUPPORTED", f"仅支持 1 维或 2 维网格，实际为 {dim}", field="dim")
    if isinstance(resolution, (int, np.integer)):
        res = tuple(int(resolution) for _ in range(dim))
    else:
        res = tuple(int(m) for m in resolution)
    if len(res) != dim:
        raise input_error("GRID_RESOLUTION_INVALID", f"分辨率个数 {len(res)} 与维数 {dim} 不一致", field="resolution")
    if min(res) < 4:
        raise input_error("GRID_RESOLUTION_TOO_SMALL", f"每轴分辨率至少为 4，实际为 {min(res)}", field="resolution")
    if not math.isfinite(period) or period <= 0:
        raise input_error("GRID_PERIOD_INVALID", f"周期必须为正，实际为 {period!r}", field="period")
    return Grid(dim=dim, resolution=res, period=float(period))


def _as_points(x: np.ndarray, dim: int) -> np.ndarray:
    """将标量或坐标数组整理为末轴长度为 dim 的形式。"""
    arr = np.asarray(x, dtype=float)
    if dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    return arr


def torus_dist2(x: np.ndarray, y: np.ndarray, grid: Grid) -> np.ndarray:
    """
    计算环面上的平方距离 Σ min(|xi−yi|, L−|xi−yi|)^2，支持广播。

    参数:
        x: 点坐标（1 维可为标量）。
        y: 点坐标。
        grid: 网格（提供周期与维数）。
    返回:
        平方距离（标量或数组）。
    """
    period = grid.period
    diff = np.mod(_as_points(x, grid.dim) - _as_points(y, grid.dim), period)
    diff = np.minimum(diff, period - diff)
    result = np.sum(diff * diff, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def cost_rows(grid: Grid, rows: np.ndarray) -> np.ndarray:
    """
    计算指定行节点到全部节点的运输代价 ½d²，按整数索引差计算以保证对称精确。

    参数:
        grid: 网格。
        rows: 行主序节点编号数组。
    返回:
        形状 (len(rows), size) 的代价矩阵。
    """
    idx = grid.index_arrays()
    total = np.zeros((len(rows), grid.size))
    for axis in range(grid.dim):
        m = grid.resolution[axis]
        delta = np.abs(idx[axis][rows][:, None] - idx[axis][None, :])
        wrapped = np.minimum(delta, m - delta) * grid.spacings[axis]
        total += wrapped * wrapped
    return 0.5 * total


def cost_matrix(grid: Grid) -> np.ndarray:
    """全体节点之间的代价矩阵 ½d²。"""
    return cost_rows(grid, np.arange(grid.size))


def wrap_displacement(delta: np.ndarray, period: float) -> np.ndarray:
    """将位移折回 [−L/2, L/2]。"""
    return delta - period * np.round(delta / period)


# endregion
# ============================================

# ============================================
# region 有限差分模板
# ============================================


def diff1(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """中心一阶差分 (f[i+1] − f[i−1]) / 2h。"""
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * spacing)


def diff2(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """三点二阶差分 (f[i+1] − 2f[i] + f[i−1]) / h²。"""
    return (np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)) / (spacing * spacing)


def diff3(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """中心三阶差分 (f[i+2] − 2f[i+1] + 2f[i−1] − f[i−2]) / 2h³。"""
    return (
        np.roll(values, -2, axis=axis)
        - 2.0 * np.roll(values, -1, axis=axis)
        + 2.0 * np.roll(values, 1, axis=axis)
        - np.roll(values, 2, axis=axis)
    ) / (2.0 * spacing ** 3)


def diff_mixed(values: np.ndarray, spacings: Tuple[float, float], axes: Tuple[int, int]) -> np.ndarray:
    """混合二阶差分 ∂a∂b，两次中心差分的复合。"""
    return diff1(diff1(values, spacings[0], axes[0]), spacings[1], axes[1])


def gradient_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """
    数组形式的梯度。

    参数:
        values: 形状为 grid.shape 的数组。
        grid: 网格。
    返回:
        形状 (dim, *shape) 的梯度数组。
    """
    return np.stack([diff1(values, grid.spacings[a], a) for a in range(grid.dim)])


def hessian_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """
    数组形式的 Hessian：对角为三点模板，混合项为两次中心差分的复合。

    参数:
        values: 形状为 grid.shape 的数组。
        grid: 网格。
    返回:
        形状 (dim, dim, *shape) 的对称数组。
    """
    dim = grid.dim
    out = np.empty((dim, dim) + grid.shape)
    for a in range(dim):
        out[a, a] = diff2(values, grid.spacings[a], a)
        for b in range(a + 1, dim):
            mixed = diff_mixed(values, (grid.spacings[a], grid.spacings[b]), (a, b))
            out[a, b] = mixed
            out[b, a] = mixed
    return out


def laplacian_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """数组形式的 Laplacian（各轴三点模板之和）。"""
    total = np.zeros(grid.shape)
    for a in range(grid.dim):
        total = total + diff2(values, grid.spacings[a], a)
    return total


def third_derivative_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """
    三阶导数对称张量。纯方向用 diff3，混合方向用 diff1∘diff2 复合。

    参数:
        values: 形状为 grid.shape 的数组。
        grid: 网格。
    返回:
        形状 (dim, dim, dim, *shape) 的数组。
    """
    dim = grid.dim
    out = np.empty((dim, dim, dim) + grid.shape)
    for a, b, c in itertools.product(range(dim), repeat=3):
        counts = [(a, b, c).count(axis) for axis in range(dim)]
        if max(counts) == 3:
            out[a, b, c] = diff3(values, grid.spacings[a], a)
            continue
        twice = counts.index(2)
        once = counts.index(1)
        out[a, b, c] = diff1(diff2(values, grid.spacings[twice], twice), grid.spacings[once], once)
    return out


def gradient(phi: GridFunction) -> VectorField:
    """
    二阶中心差分梯度。

    参数:
        phi: 网格函数。
    返回:
        dim 个分量网格函数组成的向量场。
    """
    grad = gradient_array(phi.values, phi.grid)
    return tuple(GridFunction(phi.grid, component) for component in grad)


def third_derivatives(phi: GridFunction) -> np.ndarray:
    """
    三阶导数对称张量（只读）。

    参数:
        phi: 网格函数。
    返回:
        形状 (dim, dim, dim, *shape) 的数组。
    """
    out = third_derivative_array(phi.values, phi.grid)
    out.setflags(write=False)
    return out


def hessian(phi: GridFunction) -> np.ndarray:
    """
    二阶 Hessian 矩阵场。

    参数:
        phi: 网格函数。
    返回:
        只读数组，形状 (dim, dim, *shape)。
    """
    out = hessian_array(phi.values, phi.grid)
    out.setflags(write=False)
    return out


def laplacian(phi: GridFunction) -> GridFunction:
    """
    二阶 Laplacian，与 hessian 的迹逐点一致。

    参数:
        phi: 网格函数。
    返回:
        Laplacian 网格函数。
    """
    return GridFunction(phi.grid, laplacian_array(phi.values, phi.grid))


# endregion
# ============================================

# ============================================
# region 求积与范数
# ============================================


def deterministic_sum(values: np.ndarray) -> float:
    """求和；确定性模式下用 math.fsum 保证结果与执行顺序无关。"""
    flat = np.asarray(values, dtype=float).ravel()
    if get_settings().deterministic:
        return math.fsum(flat.tolist())
    return float(np.sum(flat))


def integrate_array(values: np.ndarray, measure: Measure) -> float:
    """数组形式的 ∫ g dμ。"""
    return deterministic_sum(np.asarray(values) * measure.weight.values) * measure.node_volume


def integrate(g: GridFunction, measure: Measure) -> float:
    """
    对测度 μ 求积：Σ g·v0·节点体积。

    参数:
        g: 被积网格函数。
        measure: 测度 μ。
    返回:
        积分值。
    """
    return integrate_array(g.values, measure)


def lebesgue_integral(values: np.ndarray, grid: Grid) -> float:
    """对 dx^n 求积。"""
    return deterministic_sum(values) * grid.node_volume


def sup_norm(values: np.ndarray) -> float:
    """逐点绝对值的最大值。"""
    return float(np.max(np.abs(values)))


def vector_sup_norm(field_array: np.ndarray) -> float:
    """向量场逐点欧氏范数的最大值，输入形状 (dim, *shape)。"""
    return float(np.max(np.sqrt(np.sum(field_array * field_array, axis=0))))


def symmetric_eigen_max(matrix_field: np.ndarray) -> np.ndarray:
    """
    1×1 / 2×2 对称矩阵场的逐点最大特征值（闭式）。

    参数:
        matrix_field: 形状 (dim, dim, *shape)。
    返回:
        形状 shape 的数组。
    """
    if matrix_field.shape[0] == 1:
        return matrix_field[0, 0]
    a = matrix_field[0, 0]
    c = matrix_field[1, 1]
    b = matrix_field[0, 1]
    return 0.5 * (a + c) + np.sqrt((0.5 * (a - c)) ** 2 + b * b)


def symmetric_eigen_min(matrix_field: np.ndarray) -> np.ndarray:
    """1×1 / 2×2 对称矩阵场的逐点最小特征值（闭式）。"""
    if matrix_field.shape[0] == 1:
        return matrix_field[0, 0]
    a = matrix_field[0, 0]
    c = matrix_field[1, 1]
    b = matrix_field[0, 1]
    return 0.5 * (a + c) - np.sqrt((0.5 * (a - c)) ** 2 + b * b)


def max_hessian_eigenvalue(values: np.ndarray, grid: Grid) -> float:
    """离散 Hessian 最大特征值在全部节点上的最大值。"""
    return float(np.max(symmetric_eigen_max(hessian_array(values, grid))))


def matrix_field_sup_norm(matrix_field: np.ndarray) -> float:
    """对称矩阵场谱范数的最大值。"""
    spectral = np.maximum(np.abs(symmetric_eigen_max(matrix_field)), np.abs(symmetric_eigen_min(matrix_field)))
    return float(np.max(spectral))


def tensor_sup_norm(tensor_field: np.ndarray) -> float:
    """张量场逐点 Frobenius 范数的最大值，前三个轴为张量指标。"""
    squares = np.sum(tensor_field * tensor_field, axis=(0, 1, 2))
    return float(np.max(np.sqrt(squares)))


def lipschitz_seminorm(values: np.ndarray, grid: Grid) -> float:
    """离散 Lipschitz 半范数：相邻节点差商绝对值的最大值。"""
    best = 0.0
    for a in range(grid.dim):
        forward = (np.roll(values, -1, axis=a) - values) / grid.spacings[a]
        best = max(best, float(np.max(np.abs(forward))))
    return best


# endregion
# ============================================

# ============================================
# region 周期插值
# ============================================


def interpolate_periodic(values: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    """
    周期多线性插值（1 维线性、2 维双线性）。

    参数:
        values: 节点值，形状 grid.shape。
        grid: 网格。
        points: 形状 (dim, *pts) 的坐标，允许位于提升空间。
    返回:
        形状 pts 的插值结果。
    """
    base = []
    frac = []
    for a in range(grid.dim):
        scaled = np.asarray(points[a], dtype=float) / grid.spacings[a]
        lower = np.floor(scaled)
        frac.append(scaled - lower)
        base.append(lower.astype(np.int64))
    result = np.zeros(np.shape(points[0]))
    for corner in itertools.product((0, 1), repeat=grid.dim):
        index = tuple(np.mod(base[a] + corner[a], grid.resolution[a]) for a in range(grid.dim))
        weight = np.ones_like(result)
        for a in range(grid.dim):
            weight = weight * (frac[a] if corner[a] else 1.0 - frac[a])
        result = result + weight * values[index]
    return result


def splat_periodic(masses: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    """
    将质量按多线性权重周期地沉积到相邻节点（interpolate_periodic 的转置）。

    参数:
        masses: 每个源点的质量。
        grid: 网格。
        points: 形状 (dim, *pts) 的目标坐标。
    返回:
        形状 grid.shape 的节点质量。
    """
    out = np.zeros(grid.shape)
    base = []
    frac = []
    for a in range(grid.dim):
        scaled = np.asarray(points[a], dtype=float).ravel() / grid.spacings[a]
        lower = np.floor(scaled)
        frac.append(scaled - lower)
        base.append(lower.astype(np.int64))
    flat_mass = np.asarray(masses, dtype=float).ravel()
    for corner in itertools.product((0, 1), repeat=grid.dim):
        index = tuple(np.mod(base[a] + corner[a], grid.resolution[a]) for a in range(grid.dim))
        weight = np.ones_like(flat_mass)
        for a in range(grid.dim):
            weight = weight * (frac[a] if corner[a] else 1.0 - frac[a])
        np.add.at(out, index, weight * flat_mass)
    return out


# endregion
# ============================================
