"""
文件名: metrics.py
描述: 求解器运行指标的进程内采集与 Prometheus 文本输出。
主要功能:
    - 记录各求解器（lp/exact1d/sinkhorn/ma_1d/continuation/cn）的运行次数与耗时直方图。
    - 累计内层迭代次数与 JKO 步数。
    - 输出 Prometheus 文本格式指标，由命令行写入输出目录。
依赖: 标准库
"""

from __future__ import annotations

from dataclasses import dataclass
from threading import Lock
from typing import Dict, List, Tuple

# ============================================
# region 常量与状态
# ============================================


HISTOGRAM_BUCKETS = [0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0]

_lock = Lock()
_solver_runs_total: Dict[Tuple[str, str], int] = {}
_solver_duration: Dict[str, "HistogramState"] = {}
_solver_iterations_total: Dict[str, int] = {}
_jko_steps_total = 0


@dataclass
class HistogramState:
    """直方图状态。"""

    bucket_counts: List[int]
    count: int = 0
    total: float = 0.0

    def observe(self, value: float) -> None:
        """
        记录一次观测值。

        参数:
            value: 观测值。
        """
        self.count += 1
        self.total += value
        for index, bound in enumerate(HISTOGRAM_BUCKETS):
            if value <= bound:
                self.bucket_counts[index] += 1


# endregion
# ============================================

# ============================================
# region 记录接口
# ============================================


def record_solver_run(solver: str, status: str, duration_seconds: float, iterations: int = 0) -> None:
    """
    记录一次求解器调用。

    参数:
        solver: 求解器名称。
        status: 结果状态（ok/failed）。
        duration_seconds: 耗时秒数。
        iterations: 本次迭代次数。
    """
    name = solver or "unknown"
    normalized_status = status or "unknown"
    with _lock:
        key = (name, normalized_status)
        _solver_runs_total[key] = _solver_runs_total.get(key, 0) + 1
        state = _solver_duration.get(name)
        if state is None:
            state = HistogramState(bucket_counts=[0 for _ in HISTOGRAM_BUCKETS])
            _solver_duration[name] = state
        state.observe(max(duration_seconds, 0.0))
        _solver_iterations_total[name] = _solver_iterations_total.get(name, 0) + max(int(iterations), 0)


def record_jko_step() -> None:
    """累计已完成的 JKO 步数。"""
    with _lock:
        global _jko_steps_total
        _jko_steps_total += 1


def reset_metrics() -> None:
    """
    重置指标状态（测试用）。
    """
    with _lock:
        global _jko_steps_total
        _solver_runs_total.clear()
        _solver_duration.clear()
        _solver_iterations_total.clear()
        _jko_steps_total = 0


# endregion
# ============================================

# ============================================
# region Prometheus 文本输出
# ============================================


def _escape_label(value: str) -> str:
    """
    转义 Prometheus 标签值。

    参数:
        value: 原始标签值。
    返回:
        转义后的标签值。
    """
    return value.replace("\\", "\\\\").replace("\n", "\\n").replace('"', '\\"')


def _format_labels(labels: Dict[str, str]) -> str:
    """
    格式化标签字典为 Prometheus 标签串。

    参数:
        labels: 标签字典。
    返回:
        格式化标签串。
    """
    if not labels:
        return ""
    parts = [f'{key}="{_escape_label(labels[key])}"' for key in sorted(labels.keys())]
    return "{" + ",".join(parts) + "}"


def format_metrics() -> str:
    """
    生成 Prometheus 文本格式指标。

    返回:
        Prometheus 文本格式字符串。
    """
    with _lock:
        runs_total = dict(_solver_runs_total)
        durations = {
            key: HistogramState(bucket_counts=list(state.bucket_counts), count=state.count, total=state.total)
            for key, state in _solver_duration.items()
        }
        iterations_total = dict(_solver_iterations_total)
        jko_steps_total = _jko_steps_total

    lines: List[str] = []

    lines.append("# HELP solver_runs_total 求解器调用计数")
    lines.append("# TYPE solver_runs_total counter")
    for key in sorted(runs_total.keys()):
        solver, status = key
        labels = _format_labels({"solver": solver, "status": status})
        lines.append(f"solver_runs_total{labels} {runs_total[key]}")

    lines.append("# HELP solver_duration_seconds 求解器耗时分布")
    lines.append("# TYPE solver_duration_seconds histogram")
    for solver in sorted(durations.keys()):
        state = durations[solver]
        for bound, count in zip(HISTOGRAM_BUCKETS, state.bucket_counts):
            labels = _format_labels({"solver": solver, "le": f"{bound:.3f}".rstrip("0").rstrip(".")})
            lines.append(f"solver_duration_seconds_bucket{labels} {count}")
        labels = _format_labels({"solver": solver, "le": "+Inf"})
        lines.append(f"solver_duration_seconds_bucket{labels} {state.count}")
        labels = _format_labels({"solver": solver})
        lines.append(f"solver_duration_seconds_sum{labels} {state.total:.6f}")
        lines.append(f"solver_duration_seconds_count{labels} {state.count}")

    lines.append("# HELP solver_iterations_total 内层迭代累计次数")
    lines.append("# TYPE solver_iterations_total counter")
    for solver in sorted(iterations_total.keys()):
        labels = _format_labels({"solver": solver})
        lines.append(f"solver_iterations_total{labels} {iterations_total[solver]}")

    lines.append("# HELP jko_steps_total 已完成的 JKO 步数")
    lines.append("# TYPE jko_steps_total counter")
    lines.append(f"jko_steps_total {jko_steps_total}")

    return "\n".join(lines) + "\n"


# endregion
# ============================================
