"""
测试: 端到端验收（性质与对照解）
运行: python -m pytest tests/test_acceptance.py -v -m slow
"""

import math

import numpy as np
import pytest

from jko_lab.services.estimates import (
    check_est_bounds,
    compute_constants,
    distance_sum_check,
    lipschitz_report,
    self_consistent_K,
)
from jko_lab.services.functionals import ProblemSpec, stationary_density
from jko_lab.services.grid import GridFunction, Measure, build_grid, sup_norm
from jko_lab.services.jko import (
    LAMBDA_CAP,
    continuation_solve,
    default_test_fields,
    interpolate,
    jko_step,
    run_flow,
    weak_residual,
    weak_residual_bound,
)
from jko_lab.services.pde_ref import solve_pde
from jko_lab.services.presets import build_preset_problem, list_problem_presets
from jko_lab.services.transport import DiscreteDensity, duality_gap, sinkhorn, solve_ot_1d, solve_ot_lp

pytestmark = pytest.mark.slow


def _random_pair(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(4, 33))
    grid = build_grid(1, m)
    measure = Measure.lebesgue(grid)
    a = DiscreteDensity.from_values(0.1 + rng.random(m), measure)
    b = DiscreteDensity.from_values(0.1 + rng.random(m), measure)
    return a, b


def test_exact1d_matches_lp_on_random_pairs():
    """20 组随机一维密度对上，两种精确解的代价相对误差 ≤ 1e-9。"""
    for seed in range(20):
        a, b = _random_pair(seed)
        lp = solve_ot_lp(a, b).cost
        assert abs(solve_ot_1d(a, b).cost - lp) <= 1e-9 * (1.0 + lp)


def test_translated_density_is_rigid_rotation():
    """平移 1/4 的光滑密度: 代价 ½·0.25²。"""
    grid = build_grid(1, 32)
    x = grid.axis_nodes(0)
    measure = Measure.lebesgue(grid)
    a = DiscreteDensity.from_values(1.0 + 0.5 * np.cos(2 * np.pi * x), measure)
    b = DiscreteDensity.from_values(1.0 + 0.5 * np.cos(2 * np.pi * (x - 0.25)), measure)
    assert solve_ot_1d(a, b).cost == pytest.approx(0.5 * 0.25 ** 2, abs=1e-12)
    assert solve_ot_lp(a, b).cost == pytest.approx(0.5 * 0.25 ** 2, abs=1e-12)


def _smooth_random_pair(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(24, 33))
    grid = build_grid(1, m)
    x = grid.axis_nodes(0)
    measure = Measure.lebesgue(grid)
    phase = rng.random()
    shift = rng.uniform(0.1, 0.4)
    a = 1.0 + rng.uniform(0.3, 0.6) * np.cos(2 * np.pi * (x - phase))
    b = 1.0 + rng.uniform(0.3, 0.6) * np.cos(2 * np.pi * (x - phase - shift)) + 0.1 * np.cos(4 * np.pi * (x - rng.random()))
    return DiscreteDensity.from_values(a, measure), DiscreteDensity.from_values(b, measure)


def test_sinkhorn_within_one_percent():
    """20 组带种子的光滑随机密度对: LP 与一维精确解一致、对偶间隙受控、去偏 Sinkhorn 与 LP 相差 ≤ 1%。"""
    for seed in range(20):
        a, b = _smooth_random_pair(seed)
        lp = solve_ot_lp(a, b)
        exact = solve_ot_1d(a, b)
        assert abs(exact.cost - lp.cost) <= 1e-9 * (1.0 + lp.cost)
        assert abs(duality_gap(lp, a, b)) <= 1e-9
        assert abs(duality_gap(exact, a, b)) <= 1e-9
        result = sinkhorn(a, b)
        assert abs(result.cost - lp.cost) <= 0.01 * lp.cost
        assert result.marginal_error <= 1e-9


def test_heat_convergence_order():
    """热方程 m=128、K=0.1: N = 16/32/64 的 t=K 误差严格下降，比值 ≤ 0.75。"""
    K = 0.1
    errors = []
    grid = build_grid(1, 128)
    for N in (16, 32, 64):
        spec = build_preset_problem("heat", grid, K=K, N=N)
        traj = run_flow(spec)
        assert traj.complete
        reference = solve_pde(spec, (K / N) ** 2, [K])
        errors.append(sup_norm(interpolate(traj, K).values - reference.at(K).values))
    assert errors[0] > errors[1] > errors[2]
    assert errors[1] / errors[0] <= 0.75
    assert errors[2] / errors[1] <= 0.75


def test_heat_flow_approaches_uniform():
    spec = build_preset_problem("heat", build_grid(1, 64), K=0.1, N=16)
    traj = run_flow(spec)
    assert sup_norm(traj.densities[-1].values - 1.0) < sup_norm(spec.rho0.values - 1.0)


def test_uniform_lipschitz_across_n():
    """Fokker–Planck: sup‖∇ρ_k‖ 随 N 的变化 ≤ 10%，且不超过一致界的 110%。"""
    grid = build_grid(1, 64)
    sups = []
    for N in (16, 32, 64):
        traj = run_flow(build_preset_problem("fokker-planck", grid, K=0.1, N=N))
        assert traj.complete
        report = lipschitz_report(traj)
        sups.append(report.constants["sup_grad_rho"])
        record = report.by_name("grad_rho_uniform")[0]
        assert record.left <= 1.1 * record.right
    assert (max(sups) - min(sups)) <= 0.1 * max(sups)


@pytest.mark.parametrize("preset", ["heat", "fokker-planck", "weighted"])
def test_admissible_k_keeps_cap_and_bounds(preset):
    """可容许 K 下: h·λ_k ≤ 1/8，单步估计全部通过，距离和界成立，质量守恒。"""
    grid = build_grid(1, 32)
    trial = build_preset_problem(preset, grid, K=1.0, N=1)
    K = self_consistent_K(compute_constants(trial))
    spec = build_preset_problem(preset, grid, K=K, N=4)
    traj = run_flow(spec)
    assert traj.complete
    assert all(traj.h * lam <= LAMBDA_CAP for lam in traj.lambdas)
    for k in range(1, len(traj.densities)):
        report = check_est_bounds(traj.densities[k], traj.densities[k - 1], traj.h, spec, step=k)
        assert report.all_guaranteed_pass, [r.name for r in report.failures()]
        assert traj.steps[k - 1].ma_residual_max <= 1e-6
    total = distance_sum_check(traj).by_name("distance_sum")[0]
    assert total.passed
    assert all(abs(rho.mass - 1.0) <= 1e-10 for rho in traj.densities)


@pytest.mark.parametrize("preset", list_problem_presets())
def test_stationary_fixed_point(preset):
    spec = build_preset_problem(preset, build_grid(1, 32), K=0.01, N=1, rho0="stationary")
    result = jko_step(spec.rho0, spec.h, spec)
    assert sup_norm(result.rho_next.values - stationary_density(spec).values) <= 1e-6


def test_stationary_flow_stays_put():
    spec = build_preset_problem("weighted", build_grid(1, 32), K=0.01, N=4, rho0="stationary")
    traj = run_flow(spec)
    for rho in traj.densities:
        assert sup_norm(rho.values - spec.rho0.values) <= 1e-6
    assert all(step.transport.cost <= 1e-12 for step in traj.steps)


def test_continuation_path_independent():
    """延拓 s_steps ∈ {1, 16} 与直接求解在 1e-8 内一致。"""
    spec = build_preset_problem("fokker-planck", build_grid(1, 32), K=1.0 / 1024.0, N=1)
    direct = jko_step(spec.rho0, spec.h, spec).rho_next.values
    for s_steps in (1, 16):
        result = continuation_solve(spec, spec.h, s_steps)
        assert sup_norm(result.density.values - direct) <= 1e-8


def test_weak_residual_within_bound():
    """弱形式残差不超过 ½‖∇²ξ‖·h·∫|∇F|²ρ + A·spacing²。"""
    spec = build_preset_problem("heat", build_grid(1, 64), K=1.0 / 64.0, N=8)
    traj = run_flow(spec)
    allowance = 100.0 * spec.grid.spacing ** 2
    for k, step in enumerate(traj.steps, start=1):
        for xi in default_test_fields(spec.grid):
            residual = weak_residual(traj.densities[k], traj.densities[k - 1], traj.h, spec, xi)
            bound = weak_residual_bound(traj.densities[k], traj.h, spec, xi)
            assert abs(residual) <= bound + allowance


def test_pde_exponential_growth_and_order():
    """f 为常数 c 时 φ = ρ0·e^{ct}；dt = 1e-3 误差 ≤ 1e-6，Richardson 阶 ≥ 1.9。"""
    grid = build_grid(1, 16)
    measure = Measure.lebesgue(grid)
    c = 1.0
    spec = ProblemSpec(
        grid=grid,
        psi=GridFunction(grid, np.zeros(grid.shape)),
        f=GridFunction(grid, np.full(grid.shape, c)),
        v0=GridFunction(grid, np.ones(grid.shape)),
        rho0=DiscreteDensity.from_values(np.ones(grid.shape), measure),
        K=0.1,
        N=1,
    )
    exact = math.exp(c * 0.1)
    errors = []
    for dt in (1e-3, 5e-4):
        phi = solve_pde(spec, dt, [0.1]).snapshots[-1].values
        errors.append(float(np.max(np.abs(phi - exact))))
    assert errors[0] <= 1e-6
    assert math.log2(errors[0] / errors[1]) >= 1.9
