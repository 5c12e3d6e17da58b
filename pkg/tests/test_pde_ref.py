"""
测试: Crank–Nicolson 参考解
运行: python -m pytest tests/test_pde_ref.py -v
"""

import math

import numpy as np
import pytest

from jko_lab.errors import AppError
from jko_lab.services.functionals import stationary_density
from jko_lab.services.grid import build_grid, integrate_array
from jko_lab.services.pde_ref import CrankNicolsonStepper, pde_operator, solve_pde, step_cn
from jko_lab.services.presets import build_preset_problem


def test_heat_operator_is_laplacian(heat_spec):
    """Ψ = 0、v0 = 1 时算子为三点 Laplacian。"""
    operator = pde_operator(heat_spec).toarray()
    dx2 = heat_spec.grid.spacing ** 2
    assert operator[0, 0] == pytest.approx(-2.0 / dx2)
    assert operator[0, 1] == pytest.approx(1.0 / dx2)
    assert operator[0, 31] == pytest.approx(1.0 / dx2)
    assert np.allclose(operator.sum(axis=1), 0.0, atol=1e-9)


def test_heat_decay(heat_spec):
    """热方程参考解与 1 + ½e^{−4π²t}cos 2πx 的误差在 2e-3 内。"""
    spec = heat_spec
    result = solve_pde(spec, spec.h ** 2, [0.0, spec.K / 2, spec.K])
    x = spec.grid.axis_nodes(0)
    assert result.times == [0.0, spec.K / 2, spec.K]
    for t, phi in zip(result.times, result.snapshots):
        exact = 1.0 + 0.5 * np.exp(-4 * np.pi ** 2 * t) * np.cos(2 * np.pi * x)
        assert np.max(np.abs(phi.values - exact)) <= 2e-3


def test_mass_conserved(fokker_planck_spec):
    """通量形式保持 μ 质量。"""
    spec = fokker_planck_spec
    result = solve_pde(spec, spec.h / 4, [spec.K])
    assert integrate_array(result.snapshots[-1].values, spec.measure) == pytest.approx(1.0, abs=1e-12)


def test_stationary_density_is_steady(stationary_spec):
    spec = stationary_spec
    result = solve_pde(spec, spec.h / 2, [spec.K])
    assert np.allclose(result.snapshots[-1].values, stationary_density(spec).values, rtol=1e-10)


def test_step_cn_matches_stepper(fokker_planck_spec):
    spec = fokker_planck_spec
    dt = spec.h / 8
    one = step_cn(spec.rho0.rho, dt, spec).values
    assert np.allclose(one, CrankNicolsonStepper(spec, dt).step(spec.rho0.values))


def test_snapshot_lookup(heat_spec):
    result = solve_pde(heat_spec, heat_spec.h, [heat_spec.K, 0.0])
    assert result.times == [0.0, heat_spec.K]
    assert result.at(0.0) is result.snapshots[0]
    assert result.at(heat_spec.K * 0.9) is result.snapshots[1]


@pytest.mark.parametrize(
    "dt,times,code",
    [
        (1.0, [0.01], "DT_TOO_LARGE"),
        (1e-4, [], "SAMPLE_TIMES_EMPTY"),
        (1e-4, [1.0], "SAMPLE_TIME_OUT_OF_RANGE"),
        (0.0, [0.01], "VALUE_NOT_POSITIVE"),
    ],
)
def test_solve_pde_rejects(heat_spec, dt, times, code):
    with pytest.raises(AppError) as exc:
        solve_pde(heat_spec, dt, times)
    assert exc.value.code == code


def test_two_dimensional_mass(grid_2d):
    """二维 BiCGSTAB 路径保持质量。"""
    spec = build_preset_problem("weighted", grid_2d, K=0.01, N=2)
    result = solve_pde(spec, 0.0025, [0.005, 0.01])
    for phi in result.snapshots:
        assert integrate_array(phi.values, spec.measure) == pytest.approx(1.0, abs=1e-8)


def test_sample_time_rounding_past_k_clamps(heat_spec):
    """超出 K 仅数个 ulp 的采样时刻按 K 处理。"""
    beyond = heat_spec.K + 2.0 * math.ulp(heat_spec.K)
    reference = solve_pde(heat_spec, heat_spec.h, [0.0, beyond])
    assert reference.times[-1] == heat_spec.K
