"""
文件名: converge.py
描述: `converge` 子命令：JKO 插值解对 Crank–Nicolson 参考解的收敛研究。
主要功能:
    - 对 study.N_list 中每个 N 运行 JKO 流，在共享采样时刻与参考解比较。
    - convergence.csv: N、h、sup 误差、Lipschitz 半范数误差（多于一行时附比值列）。
    - lipschitz.csv: 各 N 的 sup‖∇ρ‖、sup‖∇F‖ 与一致界。
依赖: numpy
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from ..errors import solver_error
from ..schemas.config import RunConfig, load_run_config
from ..services.estimates import lipschitz_report
from ..services.grid import lipschitz_seminorm, sup_norm
from ..services.jko import FlowTrajectory, interpolate, run_flow
from ..services.pde_ref import PdeTrajectory, solve_pde
from ..services.reports import write_csv, write_json
from .common import apply_overrides, build_spec, finish_output, prepare_output


@dataclass(frozen=True)
class ConvergenceRow:
    """单个 N 的误差。"""

    N: int
    h: float
    sup_error: float
    lipschitz_error: float


def reference_dt(config: RunConfig) -> float:
    """参考步长，缺省 (K / max N)²。"""
    if config.study.dt_ref is not None:
        return config.study.dt_ref
    return (config.problem.K / max(config.study.N_list)) ** 2


def sample_times(config: RunConfig) -> List[float]:
    return list(config.study.sample_times or [config.problem.K])


def compare(traj: FlowTrajectory, reference: PdeTrajectory, times: Sequence[float]) -> ConvergenceRow:
    """
    在各采样时刻比较 φ_t^N 与参考解，取最大误差。

    参数:
        traj: JKO 轨迹（需完整）。
        reference: 参考解。
        times: 采样时刻。
    返回:
        ConvergenceRow。
    """
    if not traj.complete:
        failure = traj.failure
        raise solver_error(
            "TRAJECTORY_INCOMPLETE",
            f"N = {traj.spec.N} 的轨迹未完成: {failure.code if failure else '未知原因'}",
            field="N",
        )
    grid = traj.spec.grid
    sup_error = 0.0
    lip_error = 0.0
    for t in times:
        difference = interpolate(traj, t).values - reference.at(t).values
        sup_error = max(sup_error, sup_norm(difference))
        lip_error = max(lip_error, lipschitz_seminorm(difference, grid))
    return ConvergenceRow(N=traj.spec.N, h=traj.h, sup_error=sup_error, lipschitz_error=lip_error)


def convergence_table(rows: Sequence[ConvergenceRow]) -> tuple:
    """返回 (header, rows)；只有一行时不含比值列。"""
    header = ["N[-]", "h[time]", "sup_error[-]", "lipschitz_error[1/length]"]
    with_ratio = len(rows) > 1
    if with_ratio:
        header.append("ratio[-]")
    table = []
    previous: Optional[ConvergenceRow] = None
    for row in rows:
        cells = [row.N, row.h, row.sup_error, row.lipschitz_error]
        if with_ratio:
            ratio = row.sup_error / previous.sup_error if previous is not None and previous.sup_error > 0 else ""
            cells.append(ratio)
        table.append(cells)
        previous = row
    return header, table


def cmd_converge(args: argparse.Namespace) -> int:
    """
    运行收敛研究。

    参数:
        args: 命令行参数（config / out）。
    返回:
        退出码。
    """
    config_path = Path(args.config)
    config = load_run_config(config_path)
    apply_overrides(config)
    base_dir = config_path.resolve().parent
    target = prepare_output(args.out, config)
    config_hash = config.config_hash()
    times = sample_times(config)
    reference_spec = build_spec(config, base_dir, N=max(config.study.N_list))
    reference = solve_pde(reference_spec, reference_dt(config), times)
    rows: List[ConvergenceRow] = []
    lipschitz_rows = []
    for N in config.study.N_list:
        traj = run_flow(build_spec(config, base_dir, N=N), config.solver.name, eps=config.solver.eps)
        rows.append(compare(traj, reference, times))
        lipschitz = lipschitz_report(traj)
        lipschitz_rows.append(
            [
                N,
                lipschitz.constants["sup_grad_rho"],
                lipschitz.constants["sup_grad_F"],
                lipschitz.constants["gradF_uniform_bound"],
                lipschitz.all_guaranteed_pass,
            ]
        )
    header, table = convergence_table(rows)
    write_csv(target / "convergence.csv", config_hash, header, table)
    write_csv(
        target / "lipschitz.csv",
        config_hash,
        ["N[-]", "sup_grad_rho[1/length]", "sup_grad_F[1/length]", "gradF_bound[1/length]", "passed[bool]"],
        lipschitz_rows,
    )
    write_json(
        target / "convergence.json",
        {
            "config_hash": config_hash,
            "dt_ref": reference_dt(config),
            "sample_times": times,
            "rows": [row.__dict__ for row in rows],
        },
    )
    finish_output(target, "converge", N_list=list(config.study.N_list))
    return 0
