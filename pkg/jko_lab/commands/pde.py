"""
文件名: pde.py
描述: `pde` 子命令：Crank–Nicolson 参考解。
主要功能:
    - 采样时刻取 study.sample_times（缺省为节点时刻 kK/N，末节点恰为 K）。
    - 写出 snapshots/phi_XXXX 字段与 pde.csv（时刻、质量、极值）。
依赖: 无
"""

from __future__ import annotations

import argparse
from pathlib import Path

from ..schemas.config import load_run_config
from ..services.field_io import write_field, write_field_binary
from ..services.grid import integrate_array
from ..services.jko import node_times
from ..services.pde_ref import solve_pde
from ..services.reports import write_csv
from .common import apply_overrides, build_spec, finish_output, prepare_output


def cmd_pde(args: argparse.Namespace) -> int:
    """
    求解参考 PDE。

    参数:
        args: 命令行参数（config / out / dt）。
    返回:
        退出码。
    """
    config_path = Path(args.config)
    config = load_run_config(config_path)
    apply_overrides(config)
    spec = build_spec(config, config_path.resolve().parent)
    target = prepare_output(args.out, config)
    config_hash = config.config_hash()
    times = config.study.sample_times or node_times(spec.K, spec.N)
    dt = args.dt if args.dt is not None else spec.h ** 2
    reference = solve_pde(spec, dt, times)
    snapshots = target / "snapshots"
    snapshots.mkdir(parents=True, exist_ok=True)
    rows = []
    for index, (t, phi) in enumerate(zip(reference.times, reference.snapshots)):
        if config.output.binary:
            write_field_binary(snapshots / f"phi_{index:04d}.bin", phi)
        else:
            write_field(snapshots / f"phi_{index:04d}.txt", phi)
        rows.append([index, t, integrate_array(phi.values, spec.measure), float(phi.values.min()), float(phi.values.max())])
    write_csv(
        target / "pde.csv",
        config_hash,
        ["index[-]", "t[time]", "mass[-]", "min_phi[-]", "max_phi[-]"],
        rows,
    )
    finish_output(target, "pde", dt=dt, samples=len(rows))
    return 0
