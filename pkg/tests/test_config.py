"""
测试: 配置加载与错误辅助
运行: python -m pytest tests/test_config.py -v
"""

import pytest

from jko_lab.config import get_settings
from jko_lab.errors import (
    EXIT_INPUT_ERROR,
    EXIT_SOLVER_FAILURE,
    AppError,
    build_error_payload,
    ensure_finite,
    ensure_in_range,
    ensure_positive,
    input_error,
    solver_error,
)


def test_default_settings():
    """缺省值。"""
    settings = get_settings()
    assert settings.lp_max_nodes == 4096
    assert settings.newton_tol == 1e-11
    assert settings.jko_damping == 0.5
    assert settings.deterministic is True
    assert settings.eigen_tol == 1e-8


def test_env_override_and_bad_value(monkeypatch):
    """环境变量覆盖缺省值，非法值回退为缺省值。"""
    monkeypatch.setenv("JKO_SINKHORN_TOL", "1e-6")
    monkeypatch.setenv("JKO_NEWTON_MAX_ITER", "abc")
    monkeypatch.setenv("JKO_DETERMINISTIC", "false")
    get_settings.cache_clear()
    settings = get_settings()
    assert settings.sinkhorn_tol == 1e-6
    assert settings.newton_max_iter == 60
    assert settings.deterministic is False


def test_error_helpers_exit_codes():
    """输入错误退出码 1，求解失败退出码 2。"""
    assert input_error("X", "msg").exit_code == EXIT_INPUT_ERROR
    error = solver_error("Y", "msg", field="solver")
    assert error.exit_code == EXIT_SOLVER_FAILURE
    assert error.details[0].field == "solver"
    assert error.as_detail("step[3]").field == "step[3]"


def test_error_payload_shape():
    payload = build_error_payload(code="C", message="m", details=input_error("C", "m", field="k").details)
    assert payload["error"]["code"] == "C"
    assert payload["error"]["details"][0]["field"] == "k"


@pytest.mark.parametrize("value", [0.0, -1.0, float("nan"), float("inf")])
def test_ensure_positive_rejects(value):
    with pytest.raises(AppError):
        ensure_positive(value, field="h")


def test_ensure_finite_and_range():
    ensure_finite(1.0, field="x")
    with pytest.raises(AppError):
        ensure_finite(float("nan"), field="x")
    with pytest.raises(AppError):
        ensure_in_range(2.0, field="x", low=0.0, high=1.0)
