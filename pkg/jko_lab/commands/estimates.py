"""
文件名: estimates.py
描述: `estimates` 子命令：对已写出的轨迹运行全部先验估计核验。
主要功能:
    - 读取轨迹目录，写出 estimates.csv 与 estimates.json。
    - 存在未通过的保证项时以退出码 3 结束；信息项不影响退出码。
依赖: 无
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from ..errors import EXIT_ESTIMATE_VIOLATION, EXIT_OK
from ..services.estimates import trajectory_estimates
from ..services.reports import load_trajectory, read_manifest, report_summary, write_json, write_report_csv
from .common import finish_output, prepare_output

logger = logging.getLogger("jko_lab.commands.estimates")


def cmd_estimates(args: argparse.Namespace) -> int:
    """
    核验轨迹。

    参数:
        args: 命令行参数（trajectory / C / out）。
    返回:
        0 表示全部保证项通过，3 表示存在违例。
    """
    source = Path(args.trajectory)
    manifest = read_manifest(source)
    traj = load_trajectory(source)
    target = prepare_output(args.out or str(source))
    report = trajectory_estimates(traj, C=args.C)
    write_report_csv(target / "estimates.csv", report, manifest.config_hash)
    summary = report_summary(report)
    write_json(target / "estimates.json", {"config_hash": manifest.config_hash, **summary})
    finish_output(target, "estimates", passed=report.all_guaranteed_pass)
    if not report.all_guaranteed_pass:
        logger.error(
            json.dumps({"event": "command", "command": "estimates", "violations": len(summary["guaranteed_failures"])})
        )
        return EXIT_ESTIMATE_VIOLATION
    return EXIT_OK
