"""
测试: Prometheus 指标
运行: python -m pytest tests/test_metrics.py -v
"""

from jko_lab.services.metrics import format_metrics, record_jko_step, record_solver_run, reset_metrics


def test_solver_runs_and_histogram():
    """调用计数、直方图与迭代累计。"""
    record_solver_run("sinkhorn", "ok", 0.02, iterations=40)
    record_solver_run("sinkhorn", "ok", 0.2, iterations=10)
    record_solver_run("lp", "failed", 0.0)
    text = format_metrics()
    assert 'solver_runs_total{solver="sinkhorn",status="ok"} 2' in text
    assert 'solver_runs_total{solver="lp",status="failed"} 1' in text
    assert 'solver_duration_seconds_bucket{le="0.05",solver="sinkhorn"} 1' in text
    assert 'solver_duration_seconds_bucket{le="+Inf",solver="sinkhorn"} 2' in text
    assert 'solver_iterations_total{solver="sinkhorn"} 50' in text


def test_jko_steps_and_reset():
    record_jko_step()
    record_jko_step()
    assert "jko_steps_total 2" in format_metrics()
    reset_metrics()
    text = format_metrics()
    assert "jko_steps_total 0" in text
    assert "solver_runs_total{" not in text
