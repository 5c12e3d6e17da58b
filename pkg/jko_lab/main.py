"""
文件名: main.py
描述: 命令行入口：参数解析、日志配置与错误到退出码的映射。
主要功能:
    - build_parser: ot / flow / converge / estimates / pde 五个子命令。
    - main: 运行子命令，AppError 以 JSON 写入 stderr 并返回对应退出码。
依赖: 标准库 argparse
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import Optional, Sequence

from .commands.converge import cmd_converge
from .commands.estimates import cmd_estimates
from .commands.flow import cmd_flow
from .commands.ot import cmd_ot
from .commands.pde import cmd_pde
from .config import get_settings
from .errors import EXIT_INPUT_ERROR, AppError, build_error_payload
from .services.presets import list_problem_presets
from .services.transport import list_solvers

# ============================================
# region 辅助函数
# ============================================


def _setup_logging(level: str) -> logging.Logger:
    """
    配置日志（输出到 stderr，stdout 只留给命令结果）。

    参数:
        level: 日志级别名称。
    返回:
        配置后的 logger 实例。
    """
    logging.basicConfig(level=level, stream=sys.stderr)
    return logging.getLogger("jko_lab")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"不是数值: {text}") from exc
    if not value > 0:
        raise argparse.ArgumentTypeError(f"必须为正数: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """
    构建命令行解析器。

    返回:
        ArgumentParser 实例。
    """
    parser = argparse.ArgumentParser(prog="jko-lab", description="环面上 JKO 格式的求解与先验估计核验")
    sub = parser.add_subparsers(dest="command", required=True)

    ot = sub.add_parser("ot", help="两个密度之间的最优传输")
    ot.add_argument("--config", help="TOML 运行配置（ρ0 → ρ∞）")
    ot.add_argument("--a", help="源密度字段文件")
    ot.add_argument("--b", help="目标密度字段文件")
    ot.add_argument("--v0", help="参考测度权重字段文件（缺省为 Lebesgue）")
    ot.add_argument("--solver", choices=list_solvers())
    ot.add_argument("--eps", type=_positive_float, help="Sinkhorn 熵正则参数")
    ot.add_argument("--out", required=True)
    ot.set_defaults(handler=cmd_ot)

    flow = sub.add_parser("flow", help=f"运行 JKO 流（预设: {', '.join(list_problem_presets())}）")
    flow.add_argument("--config", required=True)
    flow.add_argument("--out")
    flow.set_defaults(handler=cmd_flow)

    converge = sub.add_parser("converge", help="JKO 对参考 PDE 的收敛研究")
    converge.add_argument("--config", required=True)
    converge.add_argument("--out")
    converge.set_defaults(handler=cmd_converge)

    estimates = sub.add_parser("estimates", help="对轨迹运行先验估计核验")
    estimates.add_argument("--trajectory", required=True)
    estimates.add_argument("--C", type=_positive_float, default=None)
    estimates.add_argument("--out")
    estimates.set_defaults(handler=cmd_estimates)

    pde = sub.add_parser("pde", help="Crank–Nicolson 参考解")
    pde.add_argument("--config", required=True)
    pde.add_argument("--out")
    pde.add_argument("--dt", type=_positive_float, default=None)
    pde.set_defaults(handler=cmd_pde)
    return parser


# endregion
# ============================================

# ============================================
# region 入口
# ============================================


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    命令行入口。

    参数:
        argv: 参数列表（缺省取 sys.argv）。
    返回:
        退出码。
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else EXIT_INPUT_ERROR
    logger = _setup_logging(get_settings().log_level)
    start = time.perf_counter()
    try:
        code = args.handler(args)
    except AppError as exc:
        payload = build_error_payload(code=exc.code, message=exc.message, details=exc.details)
        logger.error(json.dumps({"event": "command", "command": args.command, "status": "failed", "code": exc.code}))
        print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
        return exc.exit_code
    logger.info(
        json.dumps(
            {
                "event": "command",
                "command": args.command,
                "status": "ok" if code == 0 else "failed",
                "exit_code": code,
                "duration_ms": int((time.perf_counter() - start) * 1000),
            }
        )
    )
    return code


# endregion
# ============================================
