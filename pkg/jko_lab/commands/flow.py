"""
文件名: flow.py
描述: `flow` 子命令：运行 JKO 轨迹并写出轨迹目录、逐步诊断与估计报告。
主要功能:
    - trajectory/ 目录（字段 + manifest.json）、steps.csv、estimates.csv、summary.json。
    - 单步失败时仍写出已完成部分（manifest.partial = true）并以退出码 2 结束。
依赖: 无
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from ..errors import EXIT_OK, EXIT_SOLVER_FAILURE
from ..schemas.config import load_run_config
from ..services.estimates import trajectory_estimates
from ..services.jko import run_flow
from ..services.reports import STEPS_HEADER, dump_trajectory, report_summary, steps_rows, write_csv, write_json, write_report_csv
from .common import apply_overrides, build_spec, finish_output, prepare_output

logger = logging.getLogger("jko_lab.commands.flow")


def cmd_flow(args: argparse.Namespace) -> int:
    """
    运行 JKO 流。

    参数:
        args: 命令行参数（config / out）。
    返回:
        退出码：成功 0，单步失败 2。
    """
    config_path = Path(args.config)
    config = load_run_config(config_path)
    apply_overrides(config)
    spec = build_spec(config, config_path.resolve().parent)
    target = prepare_output(args.out, config)
    config_hash = config.config_hash()
    traj = run_flow(spec, config.solver.name, eps=config.solver.eps)
    manifest = dump_trajectory(traj, target / "trajectory", config_hash, binary=config.output.binary)
    write_csv(target / "steps.csv", config_hash, STEPS_HEADER, steps_rows(traj))
    report = trajectory_estimates(traj)
    write_report_csv(target / "estimates.csv", report, config_hash)
    summary = {
        "config_hash": config_hash,
        "name": spec.name,
        "solver": traj.solver,
        "N": spec.N,
        "K": spec.K,
        "h": traj.h,
        "steps_completed": len(traj.steps),
        "partial": manifest.partial,
        "failure": manifest.failure,
        "cap_violations": list(traj.cap_violations),
        "estimates": report_summary(report),
    }
    write_json(target / "summary.json", summary)
    finish_output(target, "flow", steps=len(traj.steps), partial=manifest.partial)
    if traj.failure is not None:
        logger.error(json.dumps({"event": "command", "command": "flow", "failure": traj.failure.code}))
        return EXIT_SOLVER_FAILURE
    return EXIT_OK
