"""
测试: 公共夹具
运行: python -m pytest tests -v
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from jko_lab.config import get_settings
from jko_lab.services.functionals import MODE_MANUFACTURED, build_problem
from jko_lab.services.grid import GridFunction, build_grid
from jko_lab.services.metrics import reset_metrics
from jko_lab.services.presets import build_preset_problem


@pytest.fixture(autouse=True)
def clean_state(monkeypatch):
    """每个用例使用默认配置与空的指标注册表。"""
    for key in list(os.environ):
        if key.startswith("JKO_"):
            monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    reset_metrics()
    yield
    get_settings.cache_clear()


@pytest.fixture
def grid_1d():
    return build_grid(1, 32, 1.0)


@pytest.fixture
def grid_2d():
    return build_grid(2, 8, 1.0)


@pytest.fixture
def heat_spec():
    """一维热方程，ρ0 = 1 + ½cos 2πx，K = 1/64，N = 8（h·λ0 ≈ 0.077）。"""
    return build_preset_problem("heat", build_grid(1, 32, 1.0), K=1.0 / 64.0, N=8)


@pytest.fixture
def fokker_planck_spec():
    """一维 Fokker–Planck，ρ0 = 1 + ½cos 2πx；λ0 较大，步长取 1/1024。"""
    return build_preset_problem("fokker-planck", build_grid(1, 32, 1.0), K=4.0 / 1024.0, N=4)


@pytest.fixture
def stationary_spec():
    return build_preset_problem("fokker-planck", build_grid(1, 32, 1.0), K=0.01, N=2, rho0="stationary")


@pytest.fixture
def spec_factory():
    """manufactured 模式的自定义问题构造器。"""

    def make(grid, psi_values, rho0_values, *, v0_values=None, K=0.1, N=4):
        v0 = GridFunction(grid, np.ones(grid.shape) if v0_values is None else v0_values)
        return build_problem(grid, GridFunction(grid, psi_values), rho0_values, K, N, v0=v0, mode=MODE_MANUFACTURED)

    return make
