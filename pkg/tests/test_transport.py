"""
测试: 环面最优传输（LP、一维精确解、Sinkhorn、c-变换与推前）
运行: python -m pytest tests/test_transport.py -v
"""

import numpy as np
import pytest

from jko_lab.config import get_settings
from jko_lab.errors import AppError
from jko_lab.services.grid import GridFunction, Measure, build_grid
from jko_lab.services.transport import (
    DiscreteDensity,
    c_transform,
    duality_gap,
    identity_map,
    map_from_potential,
    pushforward,
    sinkhorn,
    sinkhorn_gradient,
    solve_ot_1d,
    solve_ot_lp,
)


def _dirac(grid, node):
    masses = np.zeros(grid.size)
    masses[node] = 1.0
    return DiscreteDensity.from_masses(masses, Measure.lebesgue(grid))


def _smooth(grid, phase=0.0, amplitude=0.5):
    x = grid.coordinates()[0]
    return DiscreteDensity.from_values(1.0 + amplitude * np.cos(2 * np.pi * (x - phase)), Measure.lebesgue(grid))


def _random(grid, seed):
    values = 0.2 + np.random.default_rng(seed).random(grid.shape)
    return DiscreteDensity.from_values(values, Measure.lebesgue(grid))


def test_identical_densities_zero_cost():
    """同一密度之间的代价为零。"""
    grid = build_grid(1, 12)
    rho = _smooth(grid)
    assert solve_ot_lp(rho, rho).cost == pytest.approx(0.0, abs=1e-15)
    assert solve_ot_1d(rho, rho).cost == pytest.approx(0.0, abs=1e-15)
    assert sinkhorn(rho, rho).cost == 0.0


@pytest.mark.parametrize("solve", [solve_ot_lp, solve_ot_1d])
def test_dirac_translation(solve):
    """节点 0 到节点 3（m=10）的 Dirac 平移代价为 ½·0.3² = 0.045。"""
    grid = build_grid(1, 10)
    result = solve(_dirac(grid, 0), _dirac(grid, 3))
    assert result.cost == pytest.approx(0.045, abs=1e-12)


def test_dirac_wraparound():
    """节点 0 到节点 9 走环绕方向，代价为 ½·0.1²。"""
    grid = build_grid(1, 10)
    assert solve_ot_lp(_dirac(grid, 0), _dirac(grid, 9)).cost == pytest.approx(0.005, abs=1e-12)
    assert solve_ot_1d(_dirac(grid, 0), _dirac(grid, 9)).cost == pytest.approx(0.005, abs=1e-12)


def test_antipodal_tie():
    """对径点的两条测地线代价相同，均为 ½·0.5²。"""
    grid = build_grid(1, 8)
    assert solve_ot_lp(_dirac(grid, 0), _dirac(grid, 4)).cost == pytest.approx(0.125, abs=1e-12)
    assert solve_ot_1d(_dirac(grid, 0), _dirac(grid, 4)).cost == pytest.approx(0.125, abs=1e-12)


def test_uniform_to_cos_lp_matches_exact1d():
    """m=8 上均匀密度到 1+½cos 的 LP 代价与一维精确解一致。"""
    grid = build_grid(1, 8)
    uniform = DiscreteDensity.from_values(np.ones(8), Measure.lebesgue(grid))
    target = _smooth(grid)
    lp = solve_ot_lp(uniform, target).cost
    assert lp > 0
    assert lp == pytest.approx(solve_ot_1d(uniform, target).cost, abs=1e-12)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_lp_matches_exact1d_random(seed):
    grid = build_grid(1, 16)
    a = _random(grid, seed)
    b = _random(grid, seed + 100)
    assert solve_ot_lp(a, b).cost == pytest.approx(solve_ot_1d(a, b).cost, abs=1e-12)


def test_cost_symmetric():
    grid = build_grid(2, 4)
    a = _random(grid, 4)
    b = _random(grid, 5)
    assert solve_ot_lp(a, b).cost == pytest.approx(solve_ot_lp(b, a).cost, abs=1e-12)


def test_lp_duality_gap_and_marginals():
    """LP 结果的对偶间隙与边缘误差在容差内。"""
    grid = build_grid(2, 5)
    a = _random(grid, 6)
    b = _random(grid, 7)
    result = solve_ot_lp(a, b)
    assert abs(duality_gap(result, a, b)) <= 1e-10
    assert result.marginal_error <= get_settings().marginal_tol


def test_exact1d_duality_gap():
    grid = build_grid(1, 16)
    a = _random(grid, 8)
    b = _random(grid, 9)
    result = solve_ot_1d(a, b)
    assert abs(duality_gap(result, a, b)) <= 1e-10


def test_lp_potential_is_c_concave():
    """LP 对偶势满足 f^cc = f。"""
    grid = build_grid(1, 12)
    f, fc = solve_ot_lp(_random(grid, 10), _random(grid, 11)).potentials
    assert np.allclose(c_transform(fc).values, f.values, atol=1e-12)
    assert np.allclose(c_transform(f).values, fc.values, atol=1e-12)


def test_sinkhorn_close_to_lp():
    """Sinkhorn 去偏代价接近精确代价，边缘误差在容差内。"""
    grid = build_grid(1, 16)
    a = _smooth(grid)
    b = _smooth(grid, phase=0.25)
    exact = solve_ot_lp(a, b).cost
    result = sinkhorn(a, b)
    assert result.solver == "sinkhorn"
    assert result.cost >= 0
    assert result.marginal_error <= get_settings().sinkhorn_tol
    assert abs(result.cost - exact) <= 0.05 * exact + 1e-4


def test_lp_grid_size_limit(monkeypatch):
    """超过节点上限时 LP 报 LP_GRID_TOO_LARGE。"""
    monkeypatch.setenv("JKO_LP_MAX_NODES", "8")
    get_settings.cache_clear()
    grid = build_grid(1, 16)
    with pytest.raises(AppError) as exc:
        solve_ot_lp(_smooth(grid), _smooth(grid, 0.1))
    assert exc.value.code == "LP_GRID_TOO_LARGE"


def test_exact1d_rejects_2d():
    grid = build_grid(2, 4)
    with pytest.raises(AppError) as exc:
        solve_ot_1d(_random(grid, 1), _random(grid, 2))
    assert exc.value.code == "SOLVER_DIM_UNSUPPORTED"


def test_density_mass_validation():
    grid = build_grid(1, 8)
    measure = Measure.lebesgue(grid)
    with pytest.raises(AppError) as exc:
        DiscreteDensity.from_values(np.full(8, 2.0), measure, normalize=False)
    assert exc.value.code == "DENSITY_MASS_INVALID"
    values = np.ones(8)
    values[1] = -1.0
    with pytest.raises(AppError) as exc:
        DiscreteDensity.from_values(values, measure)
    assert exc.value.code == "DENSITY_NEGATIVE"


def test_pushforward_identity_and_mass():
    """恒等映射推前不变，任意映射推前保持质量。"""
    grid = build_grid(2, 6)
    rho = _random(grid, 12)
    same = pushforward(rho, identity_map(grid))
    assert np.allclose(same.values, rho.values, atol=1e-13)
    shifted = pushforward(rho, identity_map(grid) + 0.3 * grid.spacing)
    assert shifted.mass == pytest.approx(1.0, abs=1e-12)


def test_map_from_constant_potential_is_identity():
    grid = build_grid(2, 8)
    result = map_from_potential(GridFunction(grid, np.full(grid.shape, 0.3)))
    assert np.allclose(result, np.stack(grid.coordinates()), atol=1e-15)


def test_map_from_potential_follows_gradient():
    """f = 0.01·sin 2πx 时映射为 x − 0.02π·cos 2πx（模 1），误差 O(dx²)。"""
    grid = build_grid(1, 128)
    x = grid.axis_nodes(0)
    result = map_from_potential(GridFunction(grid, 0.01 * np.sin(2 * np.pi * x)))[0]
    expected = np.mod(x - 0.02 * np.pi * np.cos(2 * np.pi * x), 1.0)
    diff = np.abs(result - expected)
    assert np.max(np.minimum(diff, 1.0 - diff)) <= 5e-5


@pytest.mark.slow
def test_sinkhorn_gradient_vanishes_on_diagonal():
    """ρb = ρa 时一阶变分为常数。"""
    grid = build_grid(1, 16)
    rho = _smooth(grid)
    variation = sinkhorn_gradient(rho, rho, eps=1e-2)
    assert np.ptp(variation.values) <= 1e-8
