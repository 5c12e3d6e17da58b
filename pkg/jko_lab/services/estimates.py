"""
文件名: estimates.py
描述: 先验估计的数值核验：单步界、λ 递推、可容许 K、一致 Lipschitz 界与距离和界。
主要功能:
    - EstimateRecord / EstimateReport / SpecConstants 数据结构。
    - lambda_sup、check_est_bounds、admissible_K、lambda_recursion_check、continuation_lambda_bound。
    - lipschitz_report、distance_sum_check、trajectory_estimates。
约定: margin = right − left，passed ⇔ margin ≥ −(相对松弛·scale + A·spacing²·scale)。
依赖: numpy
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import get_settings
from ..errors import ensure_positive
from .functionals import ProblemSpec, free_energy, normalizing_constant, stationary_density, variation_field
from .grid import (
    GridFunction,
    gradient_array,
    hessian_array,
    matrix_field_sup_norm,
    max_hessian_eigenvalue,
    symmetric_eigen_min,
    tensor_sup_norm,
    third_derivative_array,
    vector_sup_norm,
)
from .jko import LAMBDA_CAP, FlowTrajectory
from .transport import DiscreteDensity

# ============================================
# region 数据结构
# ============================================


@dataclass(frozen=True)
class EstimateRecord:
    """单条不等式的核验记录。"""

    name: str
    step: int
    left: float
    right: float
    margin: float
    allowance: float
    passed: bool
    strict_passed: bool
    guaranteed: bool
    note: str = ""


@dataclass
class EstimateReport:
    """一组核验记录，附带所用常数与标记。"""

    records: List[EstimateRecord] = field(default_factory=list)
    constants: Dict[str, float] = field(default_factory=dict)
    flags: Dict[str, object] = field(default_factory=dict)

    @property
    def all_guaranteed_pass(self) -> bool:
        return all(record.passed for record in self.records if record.guaranteed)

    def failures(self, *, guaranteed_only: bool = True) -> List[EstimateRecord]:
        """未通过的记录。"""
        return [r for r in self.records if not r.passed and (r.guaranteed or not guaranteed_only)]

    def by_name(self, name: str) -> List[EstimateRecord]:
        return [r for r in self.records if r.name == name]

    def extend(self, other: "EstimateReport") -> None:
        """合并另一份报告（常数与标记以后者为准）。"""
        self.records.extend(other.records)
        self.constants.update(other.constants)
        self.flags.update(other.flags)


@dataclass(frozen=True)
class SpecConstants:
    """
    由 (Ψ, v0, ρ0) 计算的常数：
    hess_log = ‖∇²(Ψ − log v0)‖∞，hess_w = ‖∇²(Ψ − 2 log v0)‖∞，
    third_w = ‖∇³(Ψ − 2 log v0)‖∞，grad_F0 = ‖∇F0‖∞，lambda0 = sup λ(F0)。
    """

    hess_log: float
    hess_w: float
    third_w: float
    grad_F0: float
    lambda0: float
    dim: int

    def as_dict(self) -> Dict[str, float]:
        return {
            "hess_log": self.hess_log,
            "hess_w": self.hess_w,
            "third_w": self.third_w,
            "grad_F0": self.grad_F0,
            "lambda0": self.lambda0,
            "dim": float(self.dim),
        }


def _make_record(
    name: str,
    step: int,
    left: float,
    right: float,
    spacing: float,
    *,
    guaranteed: bool = True,
    note: str = "",
) -> EstimateRecord:
    settings = get_settings()
    left = float(left)
    right = float(right)
    margin = right - left
    scale = max(1.0, abs(left), abs(right))
    slack = settings.estimate_rel_slack * scale
    allowance = settings.estimate_allowance * spacing * spacing * scale
    return EstimateRecord(
        name=name,
        step=step,
        left=left,
        right=right,
        margin=margin,
        allowance=allowance,
        passed=margin >= -(slack + allowance),
        strict_passed=margin >= -slack,
        guaranteed=guaranteed,
        note=note,
    )


# endregion
# ============================================

# ============================================
# region 常数
# ============================================


def lambda_sup(F: GridFunction) -> float:
    """
    λ = 各节点离散 Hessian 最大特征值的最大值（一维即 max F″）。

    参数:
        F: 网格函数。
    返回:
        λ。
    """
    return max_hessian_eigenvalue(F.values, F.grid)


def _weight_field(spec: ProblemSpec, factor: float) -> np.ndarray:
    return spec.psi.values - factor * np.log(spec.v0.values)


def compute_constants(spec: ProblemSpec, rho0: Optional[DiscreteDensity] = None) -> SpecConstants:
    """
    计算估计所需的常数。

    参数:
        spec: 问题定义。
        rho0: 初始密度，缺省取 spec.rho0。
    返回:
        SpecConstants。
    """
    grid = spec.grid
    initial = spec.rho0 if rho0 is None else rho0
    F0 = variation_field(initial, spec)
    w = _weight_field(spec, 2.0)
    return SpecConstants(
        hess_log=matrix_field_sup_norm(hessian_array(_weight_field(spec, 1.0), grid)),
        hess_w=matrix_field_sup_norm(hessian_array(w, grid)),
        third_w=tensor_sup_norm(third_derivative_array(w, grid)),
        grad_F0=vector_sup_norm(gradient_array(F0.values, grid)),
        lambda0=lambda_sup(F0),
        dim=grid.dim,
    )


def gradient_bound(constants: SpecConstants, K: float) -> float:
    """K 一致的梯度界 B_F = ‖∇F0‖∞·exp(2K‖∇²W‖∞)，W = Ψ − 2 log v0。"""
    return constants.grad_F0 * math.exp(2.0 * K * constants.hess_w)


def instantiate_C(constants: SpecConstants, K: float) -> float:
    """
    常数 C = max(‖∇³W‖·B_F + 2‖∇²W‖, λ0, C_floor)；h ≤ 1 时它控制 λ 二次不等式的各系数。

    参数:
        constants: 常数。
        K: 终止时间。
    返回:
        C。
    """
    floor = get_settings().c_floor
    return max(constants.third_w * gradient_bound(constants, K) + 2.0 * constants.hess_w, constants.lambda0, floor)


# endregion
# ============================================

# ============================================
# region 可容许 K
# ============================================


def _bisect_quadratic(C: float, lambda0: float, upper: float) -> float:
    """在 (0, upper) 上二分求 8CK² + (11λ0 + 2C)K − 1 < 0 的上确界，宽度 1e-12。"""

    def value(K: float) -> float:
        return 8.0 * C * K * K + (11.0 * lambda0 + 2.0 * C) * K - 1.0

    lo, hi = 0.0, upper
    if value(hi) < 0:
        return hi
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if value(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo


def admissible_K_from_constants(lambda0: float, C: float, hess_log: float, hess_w: float) -> float:
    """
    同时满足以下条件的最大 K（λ0 取 max(λ0, 0)）:
    K < 1/(2C + 3λ0)；K(λ0 + KC)/(1 − 2CK − 3Kλ0) < 1/8；K ≤ 1/(6C)；
    K < max(1/‖∇²(Ψ−2log v0)‖, 1/‖∇²(Ψ−log v0)‖)，其中 1/0 = ∞。

    参数:
        lambda0: 初始 λ。
        C: 常数 C > 0。
        hess_log: ‖∇²(Ψ − log v0)‖∞。
        hess_w: ‖∇²(Ψ − 2 log v0)‖∞。
    返回:
        可容许 K（正数）。
    """
    ensure_positive(C, field="C")
    lam = max(lambda0, 0.0)
    first = 1.0 / (2.0 * C + 3.0 * lam)
    quadratic = _bisect_quadratic(C, lam, first)
    sixth = 1.0 / (6.0 * C)
    inverse = [1.0 / v if v > 0 else math.inf for v in (hess_w, hess_log)]
    hessian_cap = max(inverse)
    candidate = min(quadratic, sixth)
    if candidate >= hessian_cap:
        candidate = hessian_cap * (1.0 - 1e-12)
    return candidate


def admissible_K(spec: ProblemSpec, C: float) -> float:
    """
    按 spec 的 λ0 与 Hessian 常数计算可容许 K。

    参数:
        spec: 问题定义。
        C: 常数 C。
    返回:
        可容许 K。
    """
    constants = compute_constants(spec)
    return admissible_K_from_constants(constants.lambda0, C, constants.hess_log, constants.hess_w)


def self_consistent_K(constants: SpecConstants, rounds: int = 60) -> float:
    """C 依赖 K 而可容许 K 依赖 C；从 K = 0 迭代到不动点。"""
    K = 0.0
    for _ in range(rounds):
        C = instantiate_C(constants, K)
        updated = admissible_K_from_constants(constants.lambda0, C, constants.hess_log, constants.hess_w)
        if abs(updated - K) <= 1e-14:
            return updated
        K = updated
    return K


def continuation_lambda_bound(h: float, lambda0: float, C: float) -> float:
    """
    延拓路径上 λ(s) 的上界：x = hλ(s) 满足
    h²C + hλ0 + (hC + 2hλ0 − 1)x + (hC + hλ0)x² ≥ 0，且 λ(0) = 0，故 x 不越过较小正根。

    参数:
        h: 时间步长。
        lambda0: 初始 λ（取 max(λ0, 0)）。
        C: 常数 C。
    返回:
        λ(s) 的上界；二次式无正根时为 inf。
    """
    ensure_positive(h, field="h")
    a = h * max(lambda0, 0.0)
    c0 = h * h * C + a
    c1 = h * C + 2.0 * a - 1.0
    c2 = h * C + a
    if c2 <= 0:
        return -c0 / c1 / h if c1 < 0 else math.inf
    disc = c1 * c1 - 4.0 * c0 * c2
    if c1 >= 0 or disc < 0:
        return math.inf
    root = (-c1 - math.sqrt(disc)) / (2.0 * c2)
    return root / h


# endregion
# ============================================

# ============================================
# region 单步估计
# ============================================


def check_est_bounds(rho: DiscreteDensity, rho_prev: DiscreteDensity, h: float, spec: ProblemSpec, step: int = 1) -> EstimateReport:
    """
    单步估计：(1) ρv0 的上下夹逼；(2) 梯度界 (1 − hB)‖∇F‖ ≤ ‖∇F_prev‖；
    (3) λ 的二次不等式 q(λ) ≥ 0（列举形式），另附分组形式作信息记录。
    I + h∇²F 非半正定时报告被标记，不等式照常计算。

    参数:
        rho: 收敛的 JKO 步。
        rho_prev: 前一步。
        h: 时间步长。
        spec: 问题定义。
        step: 步号。
    返回:
        EstimateReport。
    """
    grid = spec.grid
    spacing = grid.spacing
    v0 = spec.v0.values
    n = grid.dim
    constants = compute_constants(spec, rho_prev)
    A = constants.hess_log
    B = constants.hess_w
    D3 = constants.third_w
    lambda0 = constants.lambda0
    F = variation_field(rho, spec)
    hess_F = hessian_array(F.values, grid)
    jacobian = np.eye(n).reshape((n, n) + (1,) * n) + h * hess_F
    indefinite = int(np.sum(symmetric_eigen_min(jacobian) < 0))
    weighted = rho.values * v0
    weighted_prev = rho_prev.values * v0
    G = vector_sup_norm(gradient_array(F.values, grid))
    lam = lambda_sup(F)
    report = EstimateReport(constants={**constants.as_dict(), "h": h})
    if indefinite:
        report.flags["hypothesis_violated"] = True
        report.flags["indefinite_nodes"] = indefinite
    report.records.append(
        _make_record("linf_upper", step, weighted.max(), (1.0 + h * A) ** n * weighted_prev.max(), spacing)
    )
    report.records.append(
        _make_record("linf_lower", step, (1.0 - h * A) ** n * weighted_prev.min(), weighted.min(), spacing)
    )
    report.records.append(_make_record("gradient_contraction", step, (1.0 - h * B) * G, constants.grad_F0, spacing))
    quadratic = (
        h * D3 * G
        + lambda0
        + (h * h * D3 * G + 2.0 * h * B + 2.0 * h * lambda0 - 1.0) * lam
        + (h ** 3 * D3 * G / 3.0 + h * h * B + h * h * lambda0) * lam * lam
    )
    report.records.append(_make_record("lambda_quadratic", step, 0.0, quadratic, spacing))
    grouped_left = lam - (1.0 + h * lam) ** 2 * lambda0
    grouped_right = h * D3 * G * (1.0 + h * lam + h * h * lam * lam / 3.0) + h * B * (2.0 * lam + h * lam * lam)
    grouped_record = _make_record("lambda_grouped", step, grouped_left, grouped_right, spacing, guaranteed=False)
    if grouped_record.passed != report.records[-1].passed:
        report.flags.setdefault("lambda_grouping_mismatch", []).append(step)
    report.records.append(grouped_record)
    return report


# endregion
# ============================================

# ============================================
# region 轨迹估计
# ============================================


def lambda_recursion_check(traj: FlowTrajectory, C: float, constants: Optional[SpecConstants] = None) -> EstimateReport:
    """
    λ 递推: b_0 = hλ0，b_k = (h²C + b_{k−1})/(1 − 2hC − 3b_{k−1})，逐步比较实测 hλ_k ≤ b_k；
    另核验聚合界 (K/N)(λ0 + KC)/(1 − 2CK − 3Kλ0) 与上限 1/8。
    K 可容许时记录为保证项，否则为信息项。

    参数:
        traj: 轨迹。
        C: 常数 C。
        constants: 预先计算的常数。
    返回:
        EstimateReport。
    """
    ensure_positive(C, field="C")
    spec = traj.spec
    spacing = spec.grid.spacing
    consts = compute_constants(spec) if constants is None else constants
    h = traj.h
    K = spec.K
    lambda0 = traj.lambdas[0]
    admissible = admissible_K_from_constants(lambda0, C, consts.hess_log, consts.hess_w)
    guaranteed = K <= admissible
    report = EstimateReport(constants={"C": C, "K": K, "h": h, "admissible_K": admissible})
    report.flags["K_admissible"] = guaranteed
    bound = h * lambda0
    chain_alive = True
    first_violation: Optional[int] = None
    for k in range(1, len(traj.lambdas)):
        measured = h * traj.lambdas[k]
        if chain_alive:
            denominator = 1.0 - 2.0 * h * C - 3.0 * bound
            if denominator <= 0:
                report.records.append(
                    _make_record("lambda_denominator", k, 0.0, denominator, 0.0, guaranteed=guaranteed, note="outside admissible regime")
                )
                report.flags["outside_admissible_regime_step"] = k
                chain_alive = False
            else:
                bound = (h * h * C + bound) / denominator
                record = _make_record("lambda_recursion", k, measured, bound, spacing, guaranteed=guaranteed)
                if not record.passed and first_violation is None:
                    first_violation = k
                report.records.append(record)
        report.records.append(_make_record("lambda_cap", k, measured, LAMBDA_CAP, spacing, guaranteed=guaranteed))
    if first_violation is not None:
        report.flags["first_recursion_violation"] = first_violation
    aggregate_denominator = 1.0 - 2.0 * C * K - 3.0 * K * max(lambda0, 0.0)
    measured_max = max([h * lam for lam in traj.lambdas[1:]], default=h * lambda0)
    if aggregate_denominator > 0:
        aggregate = h * (max(lambda0, 0.0) + K * C) / aggregate_denominator
        report.records.append(_make_record("lambda_aggregate", 0, measured_max, aggregate, spacing, guaranteed=guaranteed))
    else:
        report.records.append(
            _make_record("lambda_denominator", 0, 0.0, aggregate_denominator, 0.0, guaranteed=guaranteed, note="outside admissible regime")
        )
    return report


def lipschitz_report(traj: FlowTrajectory, constants: Optional[SpecConstants] = None) -> EstimateReport:
    """
    一致 Lipschitz 界：逐步 ‖∇F_k‖ ≤ (1 − hB)^{−k}‖∇F0‖ 与 K 一致界 e^{2KB}‖∇F0‖（hB ≤ ½），
    L∞ 夹逼 (1 ± hA)^{nk}（逐步）与 e^{nKA}、e^{−2nKA}（hA ≤ ½），以及 ‖∇ρ_k‖ 的一致界。

    参数:
        traj: 轨迹。
        constants: 预先计算的常数。
    返回:
        EstimateReport（constants 中含 sup_grad_rho 与 sup_grad_F）。
    """
    spec = traj.spec
    grid = spec.grid
    spacing = grid.spacing
    consts = compute_constants(spec) if constants is None else constants
    h = traj.h
    K = spec.K
    n = grid.dim
    A = consts.hess_log
    B = consts.hess_w
    v0 = spec.v0.values
    rho0v0 = spec.rho0.values * v0
    sup0 = float(rho0v0.max())
    inf0 = float(rho0v0.min())
    report = EstimateReport()
    grad_F: List[float] = []
    grad_rho: List[float] = []
    for k, rho in enumerate(traj.densities):
        F = variation_field(rho, spec)
        grad_F.append(vector_sup_norm(gradient_array(F.values, grid)))
        grad_rho.append(vector_sup_norm(gradient_array(rho.values, grid)))
        if k == 0:
            continue
        weighted = rho.values * v0
        if h * B < 1.0:
            right = (1.0 - h * B) ** (-k) * consts.grad_F0
            report.records.append(_make_record("gradF_step", k, grad_F[-1], right, spacing))
        report.records.append(_make_record("upper_step", k, weighted.max(), (1.0 + h * A) ** (n * k) * sup0, spacing))
        if h * A < 1.0:
            report.records.append(_make_record("lower_step", k, (1.0 - h * A) ** (n * k) * inf0, weighted.min(), spacing))
    uniform_grad = gradient_bound(consts, K)
    report.records.append(
        _make_record(
            "gradF_uniform",
            0,
            max(grad_F),
            uniform_grad,
            spacing,
            guaranteed=h * B <= 0.5,
            note="" if h * B <= 0.5 else "h·B > 1/2",
        )
    )
    upper_uniform = math.exp(n * K * A) * sup0
    report.records.append(
        _make_record("upper_uniform", 0, max(float((r.values * v0).max()) for r in traj.densities), upper_uniform, spacing)
    )
    report.records.append(
        _make_record(
            "lower_uniform",
            0,
            math.exp(-2.0 * n * K * A) * inf0,
            min(float((r.values * v0).min()) for r in traj.densities),
            spacing,
            guaranteed=h * A <= 0.5,
            note="" if h * A <= 0.5 else "h·A > 1/2",
        )
    )
    rho_max = upper_uniform / float(v0.min())
    drift = vector_sup_norm(gradient_array(np.log(v0) - spec.psi.values, grid))
    report.records.append(
        _make_record("grad_rho_uniform", 0, max(grad_rho), rho_max * (uniform_grad + drift), spacing, guaranteed=h * B <= 0.5)
    )
    report.constants.update(
        {"sup_grad_rho": max(grad_rho), "sup_grad_F": max(grad_F), "gradF_uniform_bound": uniform_grad}
    )
    return report


def distance_sum_check(traj: FlowTrajectory) -> EstimateReport:
    """
    距离和界 Σ_k cost_k ≤ h(E(ρ0) − E(ρ∞))（cost 为 ½d² 代价下的传输值），
    另含逐步目标不等式、能量单调性，以及 E(ρ∞) 与 log C 的交叉核验。

    参数:
        traj: 轨迹。
    返回:
        EstimateReport。
    """
    spec = traj.spec
    spacing = spec.grid.spacing
    h = traj.h
    settings = get_settings()
    energies = [free_energy(rho, spec).total for rho in traj.densities]
    e_min = free_energy(stationary_density(spec), spec).total
    log_c = math.log(normalizing_constant(spec))
    report = EstimateReport(constants={"E0": energies[0], "E_min": e_min, "log_C": log_c})
    total_cost = 0.0
    for k, result in enumerate(traj.steps, start=1):
        total_cost += result.transport.cost
        report.records.append(
            _make_record("one_step", k, result.transport.cost + h * energies[k], h * energies[k - 1], spacing)
        )
        report.records.append(
            _make_record("energy_monotone", k, energies[k], energies[k - 1] + settings.jko_inner_tol, spacing)
        )
    report.records.append(_make_record("distance_sum", 0, total_cost, h * (energies[0] - e_min), spacing))
    report.records.append(_make_record("energy_min_crosscheck", 0, abs(e_min - log_c), 1e-10, 0.0))
    return report


def trajectory_estimates(traj: FlowTrajectory, C: Optional[float] = None) -> EstimateReport:
    """
    对整条轨迹运行全部核验。

    参数:
        traj: 轨迹。
        C: 常数 C，缺省按 instantiate_C 计算。
    返回:
        合并后的 EstimateReport。
    """
    spec = traj.spec
    constants = compute_constants(spec)
    value = instantiate_C(constants, spec.K) if C is None else float(C)
    report = EstimateReport(constants={**constants.as_dict(), "C": value, "K": spec.K, "h": traj.h})
    for k in range(1, len(traj.densities)):
        report.extend(check_est_bounds(traj.densities[k], traj.densities[k - 1], traj.h, spec, step=k))
    report.extend(lambda_recursion_check(traj, value, constants))
    report.extend(lipschitz_report(traj, constants))
    report.extend(distance_sum_check(traj))
    report.constants.update({**constants.as_dict(), "C": value, "K": spec.K, "h": traj.h})
    if traj.cap_violations:
        report.flags["cap_violations"] = list(traj.cap_violations)
    return report


# endregion
# ============================================
