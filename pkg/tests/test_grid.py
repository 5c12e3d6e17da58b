"""
测试: 周期网格、差分模板、求积与插值
运行: python -m pytest tests/test_grid.py -v
"""

import numpy as np
import pytest

from jko_lab.errors import AppError
from jko_lab.services.grid import (
    GridFunction,
    Measure,
    build_grid,
    cost_matrix,
    gradient,
    gradient_array,
    hessian,
    integrate,
    interpolate_periodic,
    laplacian,
    lipschitz_seminorm,
    max_hessian_eigenvalue,
    splat_periodic,
    symmetric_eigen_max,
    hessian_array,
    torus_dist2,
)


def _sin(grid, axis=0):
    return np.sin(2 * np.pi * grid.coordinates()[axis])


def test_build_grid_nodes_1d():
    """(1, 8, 1.0) 的节点为 i/8。"""
    grid = build_grid(1, 8, 1.0)
    assert np.array_equal(grid.axis_nodes(0), np.arange(8) / 8.0)


def test_build_grid_2d_lattice():
    """(2, 4, 1.0) 为 16 个节点的 4×4 格点。"""
    grid = build_grid(2, 4, 1.0)
    assert grid.size == 16
    assert grid.shape == (4, 4)
    assert grid.points().shape == (16, 2)


@pytest.mark.parametrize(
    "dim,resolution,code",
    [(1, 3, "GRID_RESOLUTION_TOO_SMALL"), (3, 8, "GRID_DIM_UNSUPPORTED"), (2, [8], "GRID_RESOLUTION_INVALID")],
)
def test_build_grid_rejects(dim, resolution, code):
    """维数与分辨率校验。"""
    with pytest.raises(AppError) as exc:
        build_grid(dim, resolution, 1.0)
    assert exc.value.code == code
    assert exc.value.exit_code == 1


def test_torus_dist2_wraps():
    """环绕距离与对径点。"""
    g1 = build_grid(1, 8)
    g2 = build_grid(2, 8)
    assert torus_dist2(0.1, 0.9, g1) == pytest.approx(0.04, abs=1e-15)
    assert torus_dist2(0.3, 0.3, g1) == 0.0
    assert torus_dist2(np.array([0.0, 0.0]), np.array([0.5, 0.5]), g2) == pytest.approx(0.5)


def test_cost_matrix_symmetric():
    """代价矩阵对称、对角为零，且为 ½d²。"""
    grid = build_grid(1, 10)
    cost = cost_matrix(grid)
    assert np.array_equal(cost, cost.T)
    assert np.all(np.diag(cost) == 0)
    assert cost[0, 3] == pytest.approx(0.045)
    assert cost[0, 7] == pytest.approx(0.045)


def test_gradient_of_constant_is_zero():
    """常数场梯度精确为零。"""
    grid = build_grid(2, 8)
    phi = GridFunction(grid, np.full(grid.shape, 3.7))
    for component in gradient(phi):
        assert np.all(component.values == 0.0)
    assert np.all(hessian(phi) == 0.0)
    assert np.all(laplacian(phi).values == 0.0)


def test_gradient_accuracy_sin():
    """sin 2πx 的梯度误差不超过 (2π)³·dx²/6。"""
    grid = build_grid(1, 128)
    x = grid.axis_nodes(0)
    error = np.max(np.abs(gradient_array(np.sin(2 * np.pi * x), grid)[0] - 2 * np.pi * np.cos(2 * np.pi * x)))
    assert error <= (2 * np.pi) ** 3 * grid.spacing ** 2 / 6


def test_laplacian_accuracy_cos():
    """cos 2πx 的 Laplacian 误差不超过 (2π)⁴·dx²/12。"""
    grid = build_grid(1, 128)
    x = grid.axis_nodes(0)
    phi = GridFunction(grid, np.cos(2 * np.pi * x))
    error = np.max(np.abs(laplacian(phi).values + 4 * np.pi ** 2 * np.cos(2 * np.pi * x)))
    assert error <= (2 * np.pi) ** 4 * grid.spacing ** 2 / 12


def test_gradient_second_order():
    """网格加密一倍，梯度误差缩小到 1/4 左右。"""
    errors = []
    for m in (32, 64):
        grid = build_grid(1, m)
        x = grid.axis_nodes(0)
        errors.append(np.max(np.abs(gradient_array(np.sin(2 * np.pi * x), grid)[0] - 2 * np.pi * np.cos(2 * np.pi * x))))
    assert 3.5 <= errors[0] / errors[1] <= 4.5


def test_separable_gradient_component_zero():
    """sin 2πx 在二维上的 y 分量恒为零。"""
    grid = build_grid(2, 16)
    gx, gy = gradient(GridFunction(grid, _sin(grid, 0)))
    assert np.all(gy.values == 0.0)
    assert np.max(np.abs(gx.values)) > 0


def test_hessian_trace_equals_laplacian():
    """二维 Hessian 的迹与 Laplacian 逐点一致。"""
    grid = build_grid(2, 16)
    phi = GridFunction(grid, _sin(grid, 0) * _sin(grid, 1))
    h = hessian(phi)
    assert np.max(np.abs(h[0, 0] + h[1, 1] - laplacian(phi).values)) <= 1e-12
    assert np.array_equal(h[0, 1], h[1, 0])


def test_shift_commutes_with_stencil():
    """循环平移与差分可交换。"""
    grid = build_grid(1, 16)
    rng = np.random.default_rng(3)
    values = rng.normal(size=grid.shape)
    shifted = np.roll(values, 1)
    assert np.array_equal(gradient_array(shifted, grid)[0], np.roll(gradient_array(values, grid)[0], 1))
    assert np.array_equal(hessian_array(shifted, grid)[0, 0], np.roll(hessian_array(values, grid)[0, 0], 1))


def test_integrate_linear_and_exact():
    """单位质量、线性与正弦精确求积。"""
    grid = build_grid(1, 16)
    measure = Measure.lebesgue(grid)
    assert integrate(GridFunction(grid, np.ones(16)), measure) == pytest.approx(1.0, abs=1e-15)
    assert integrate(GridFunction(grid, np.full(16, 2.0)), measure) == pytest.approx(2.0, abs=1e-15)
    assert abs(integrate(GridFunction(grid, _sin(grid)), measure)) <= 1e-15


def test_integrate_monotone():
    """非负被积函数的积分非负。"""
    grid = build_grid(2, 8)
    rng = np.random.default_rng(0)
    weight = GridFunction(grid, 1.0 + rng.random(grid.shape))
    g = GridFunction(grid, rng.random(grid.shape))
    assert integrate(g, Measure(grid, weight)) >= 0


def test_measure_rejects_nonpositive_weight():
    grid = build_grid(1, 8)
    values = np.ones(8)
    values[2] = 0.0
    with pytest.raises(AppError) as exc:
        Measure(grid, GridFunction(grid, values))
    assert exc.value.code == "WEIGHT_NOT_POSITIVE"


def test_grid_function_rejects_nan():
    grid = build_grid(1, 8)
    values = np.ones(8)
    values[5] = np.nan
    with pytest.raises(AppError) as exc:
        GridFunction(grid, values)
    assert exc.value.code == "FIELD_NOT_FINITE"


def test_max_hessian_eigenvalue_matches_eigvalsh():
    """二维逐点闭式特征值与 numpy 特征分解一致。"""
    grid = build_grid(2, 8)
    rng = np.random.default_rng(11)
    values = rng.normal(size=grid.shape)
    hess = hessian_array(values, grid)
    closed = symmetric_eigen_max(hess)
    matrices = np.moveaxis(hess, (0, 1), (-2, -1))
    direct = np.linalg.eigvalsh(matrices)[..., -1]
    assert np.allclose(closed, direct, rtol=1e-12, atol=1e-9)
    assert max_hessian_eigenvalue(values, grid) == pytest.approx(float(direct.max()), rel=1e-12)


def test_lambda_of_cos():
    """cos 2πx 的最大二阶导为 4π²（在 x = ½ 处）。"""
    grid = build_grid(1, 128)
    values = np.cos(2 * np.pi * grid.axis_nodes(0))
    assert max_hessian_eigenvalue(values, grid) == pytest.approx(4 * np.pi ** 2, rel=(2 * np.pi / 128) ** 2)


def test_interpolate_at_nodes_and_wrap():
    """在节点处插值返回节点值，提升坐标按周期折回。"""
    grid = build_grid(2, 8)
    values = np.arange(64, dtype=float).reshape(8, 8)
    points = np.stack(grid.coordinates())
    assert np.allclose(interpolate_periodic(values, grid, points), values)
    assert np.allclose(interpolate_periodic(values, grid, points + 1.0), values)


def test_splat_conserves_mass():
    """周期沉积保持总质量。"""
    grid = build_grid(1, 16)
    masses = np.random.default_rng(2).random(16)
    points = np.stack(grid.coordinates()) + 0.37 * grid.spacing
    deposited = splat_periodic(masses, grid, points)
    assert deposited.sum() == pytest.approx(masses.sum(), abs=1e-14)


def test_lipschitz_seminorm_sin():
    grid = build_grid(1, 256)
    assert lipschitz_seminorm(_sin(grid), grid) == pytest.approx(2 * np.pi, rel=1e-3)
