"""
测试: 循环三对角求解
运行: python -m pytest tests/test_linalg.py -v
"""

import numpy as np
import pytest

from jko_lab.services.linalg import apply_cyclic_tridiagonal, solve_cyclic_tridiagonal


def _dense(lower, diag, upper):
    n = len(diag)
    matrix = np.zeros((n, n))
    for i in range(n):
        matrix[i, (i - 1) % n] += lower[i]
        matrix[i, i] += diag[i]
        matrix[i, (i + 1) % n] += upper[i]
    return matrix


def test_solve_matches_dense():
    """与稠密矩阵求解一致。"""
    rng = np.random.default_rng(7)
    n = 12
    lower = -rng.random(n)
    upper = -rng.random(n)
    diag = 3.0 + rng.random(n)
    rhs = rng.normal(size=n)
    x = solve_cyclic_tridiagonal(lower, diag, upper, rhs)
    assert np.allclose(x, np.linalg.solve(_dense(lower, diag, upper), rhs), atol=1e-12)
    assert np.allclose(apply_cyclic_tridiagonal(lower, diag, upper, x), rhs, atol=1e-12)


def test_apply_matches_dense():
    rng = np.random.default_rng(8)
    n = 9
    lower, diag, upper, x = (rng.normal(size=n) for _ in range(4))
    assert np.allclose(apply_cyclic_tridiagonal(lower, diag, upper, x), _dense(lower, diag, upper) @ x)


def test_implicit_heat_system_preserves_sum():
    """(I − rL) 型周期系统保持分量和。"""
    n = 16
    r = 0.7
    rhs = np.random.default_rng(9).random(n)
    x = solve_cyclic_tridiagonal(-r * np.ones(n), (1 + 2 * r) * np.ones(n), -r * np.ones(n), rhs)
    assert x.sum() == pytest.approx(rhs.sum(), rel=1e-13)
