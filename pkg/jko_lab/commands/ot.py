"""
文件名: ot.py
描述: `ot` 子命令：两个密度之间的最优传输求解。
主要功能:
    - 输入为两个字段文件（--a/--b，可选 --v0）或配置文件（ρ0 → ρ∞）。
    - 标准输出打印 `cost <值>`，输出目录写入势函数、映射、传输计划与 result.json。
依赖: numpy
"""

from __future__ import annotations

import argparse
import hashlib
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..errors import input_error
from ..schemas.config import load_run_config
from ..services.field_io import format_float, load_field_any, write_field
from ..services.functionals import stationary_density
from ..services.grid import GridFunction, Measure
from ..services.reports import write_csv, write_json
from ..services.transport import DiscreteDensity, TransportResult, duality_gap, sinkhorn, solve_ot_1d, solve_ot_lp
from .common import apply_overrides, build_spec, finish_output, prepare_output

OT_SOLVERS: Dict[str, Callable[..., TransportResult]] = {
    "lp": solve_ot_lp,
    "exact1d": solve_ot_1d,
}


def _hash_files(*paths: Path, extra: str = "") -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(path.read_bytes())
    digest.update(extra.encode("utf-8"))
    return digest.hexdigest()[:16]


def _load_pair(args: argparse.Namespace) -> Tuple[DiscreteDensity, DiscreteDensity, str, str]:
    """返回 (ρa, ρb, config_hash, solver)。"""
    if args.config:
        config = load_run_config(Path(args.config))
        apply_overrides(config)
        spec = build_spec(config, Path(args.config).resolve().parent)
        solver = args.solver or config.solver.ot
        return spec.rho0, stationary_density(spec), config.config_hash(), solver
    if not args.a or not args.b:
        raise input_error("OT_INPUT_MISSING", "需要 --config 或同时给出 --a 与 --b", field="a")
    solver = args.solver or "lp"
    path_a = Path(args.a)
    path_b = Path(args.b)
    field_a = load_field_any(path_a)
    field_b = load_field_any(path_b)
    if field_a.grid != field_b.grid:
        raise input_error("GRID_MISMATCH", f"{path_a} 与 {path_b} 的网格不一致", field="b")
    grid = field_a.grid
    hashed = [path_a, path_b]
    if args.v0:
        v0_path = Path(args.v0)
        weight = load_field_any(v0_path)
        if weight.grid != grid:
            raise input_error("GRID_MISMATCH", f"{v0_path} 的网格与密度不一致", field="v0")
        measure = Measure(grid, weight)
        hashed.append(v0_path)
    else:
        measure = Measure.lebesgue(grid)
    rho_a = DiscreteDensity.from_values(field_a.values, measure)
    rho_b = DiscreteDensity.from_values(field_b.values, measure)
    return rho_a, rho_b, _hash_files(*hashed, extra=f"{solver}:{args.eps}"), solver


def _solve(rho_a: DiscreteDensity, rho_b: DiscreteDensity, solver: str, eps: Optional[float]) -> TransportResult:
    if solver == "sinkhorn":
        return sinkhorn(rho_a, rho_b, eps)
    handler = OT_SOLVERS.get(solver)
    if handler is None:
        raise input_error("SOLVER_UNKNOWN", f"未知的传输求解器: {solver}", field="solver")
    return handler(rho_a, rho_b)


def cmd_ot(args: argparse.Namespace) -> int:
    """
    求解 OT 并写出产物。

    参数:
        args: 命令行参数（config / a / b / v0 / solver / eps / out）。
    返回:
        退出码。
    """
    rho_a, rho_b, config_hash, solver = _load_pair(args)
    target = prepare_output(args.out)
    result = _solve(rho_a, rho_b, solver, args.eps)
    grid = rho_a.grid
    if result.potentials is not None:
        write_field(target / "potential_f.txt", result.potentials[0])
        write_field(target / "potential_g.txt", result.potentials[1])
    if result.transport_map is not None:
        for axis in range(grid.dim):
            write_field(target / f"map_{axis}.txt", GridFunction(grid, result.transport_map[axis]))
    if result.plan is not None:
        rows = [[int(i), int(j), float(result.plan[i, j])] for i, j in zip(*np.nonzero(result.plan))]
        write_csv(target / "plan.csv", config_hash, ["source[node]", "target[node]", "mass[-]"], rows)
    payload = {
        "config_hash": config_hash,
        "solver": result.solver,
        "cost": result.cost,
        "raw_cost": result.raw_cost,
        "marginal_error": result.marginal_error,
        "iterations": result.iterations,
        "epsilon": result.epsilon,
    }
    if result.potentials is not None and result.solver != "sinkhorn":
        payload["duality_gap"] = duality_gap(result, rho_a, rho_b)
    write_json(target / "result.json", payload)
    print(f"cost {format_float(result.cost)}")
    finish_output(target, "ot", solver=result.solver, cost=result.cost)
    return 0
