# 檔名：sweeps.py
# 專案路徑：src/optimize/sweeps.py
# 功能：各數值實驗的掃描：固定區塊長度下的 ε_DF(v)、中繼位置、最小 n 曲線、
#      δ*(k) 與延遲預算、τ*(n) profile。每一列是一個 SweepRow。

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from loguru import logger

from src.analysis.error_model import (
    ErrorBreakdown,
    PerformancePoint,
    QuadratureConfig,
    breakdown_grid,
    performance_point,
)
from src.common.errors import ContractError
from src.model.link import BlockPlan, SystemParams
from src.optimize.search import (
    OptimumPoint,
    best_from_grid,
    evaluate_grid,
    min_delay,
    min_n_for_target,
    validate_grid,
)

Targets = Union[float, Sequence[float]]


@dataclass(frozen=True)
class SweepRow:
    """掃描座標，加上該座標的 ErrorBreakdown／PerformancePoint 或最佳化結果。"""

    coords: dict
    breakdown: Optional[ErrorBreakdown] = None
    performance: Optional[PerformancePoint] = None
    optimum: Optional[OptimumPoint] = None
    feasible: bool = True
    extra: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        record = dict(self.coords)
        if self.breakdown is not None:
            record.update(e_r=self.breakdown.e_r, e_d=self.breakdown.e_d, e_rd=self.breakdown.e_rd, e_df=self.breakdown.e_df)
        if self.breakdown is not None or self.performance is not None:
            perf = self.performance
            record.update(
                throughput=perf.throughput if perf else 0.0,
                delay=perf.delay if perf else math.inf,
                delay_seconds=perf.delay_seconds if perf else math.inf,
            )
        if self.optimum is not None:
            opt = self.optimum
            record.update(
                n_opt=opt.n, v_opt=opt.v, alpha_opt=opt.alpha, tau_opt=opt.tau, delta_opt=opt.delta, eps_df_opt=opt.eps_df
            )
        record["feasible"] = self.feasible
        record.update(self.extra)
        return record


def _targets(eps0: Targets) -> tuple[float, ...]:
    values = (float(eps0),) if np.isscalar(eps0) else tuple(float(e) for e in eps0)
    if not values:
        raise ContractError("eps0 清單不可為空")
    return values


def fixed_budget_sweep(
    total: int,
    k: int,
    params: SystemParams,
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
) -> list[SweepRow]:
    """
    固定 2n+v = total，對每個 v 取 n = (total - v)/2 算 E[ε_DF]。
    v 必須 < total 且 total - v 為偶數；不符合的值一次列出後丟 ContractError。
    """
    vs = validate_grid("v_grid", v_grid, 0)
    bad = [int(v) for v in vs if v >= total or (total - v) % 2]
    if bad:
        raise ContractError(f"v 必須 < {total} 且 ({total} - v) 為偶數；不合法的值：{bad}")
    rows = []
    for v in vs:
        n = int((total - v) // 2)
        plan = BlockPlan(n=n, v=int(v), k=k)
        b = breakdown_grid(n, k, [int(v)], params, quad).breakdown(0)
        rows.append(
            SweepRow(
                coords={"k": k, "v": int(v), "n": n, "alpha": plan.alpha},
                breakdown=b,
                performance=performance_point(plan, params, b),
            )
        )
    logger.debug(f"fixed_budget_sweep total={total} k={k} |v|={len(rows)}")
    return rows


def best_row(rows: Sequence[SweepRow]) -> SweepRow:
    """E[ε_DF] 最小的列（同分取較小 v）；固定區塊長度時也就是 τ 最大的列。"""
    if not rows:
        raise ContractError("rows 不可為空")
    return min(rows, key=lambda row: (row.breakdown.e_df, row.coords["v"]))


def relay_position_sweep(
    k: int,
    eps0: Targets,
    params: SystemParams,
    d_total: float,
    d1_grid: Sequence[float],
    n_grid: Sequence[int],
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
    workers: int = 1,
    delay_budget: Optional[float] = None,
) -> list[SweepRow]:
    """
    每個 d1（d2 = d_total - d1）的最小延遲；eps0 可給多個，共用同一次格點評估。
    給了 delay_budget 時，feasible 同時要求 δ* <= delay_budget。
    """
    targets = _targets(eps0)
    d1_values = [float(d) for d in d1_grid]
    if not d1_values:
        raise ContractError("d1_grid 不可為空")
    rows = []
    for d1 in d1_values:
        moved = params.with_relay_position(d1, d_total)
        grid = evaluate_grid(k, moved, n_grid, v_grid, quad, workers)
        for target in targets:
            opt = min_delay(k, target, moved, n_grid, v_grid, rows=grid)
            within = opt.feasible and (delay_budget is None or opt.delta <= delay_budget)
            extra = {"delta_seconds": opt.delta_seconds(moved)}
            if delay_budget is not None:
                extra["within_budget"] = within
            rows.append(
                SweepRow(
                    coords={"k": k, "eps0": target, "d1": d1, "d2": moved.d2},
                    optimum=opt,
                    feasible=within,
                    extra=extra,
                )
            )
        logger.debug(f"relay_position_sweep d1={d1:.3f} 完成")
    return rows


def min_n_curve(
    v_grid: Sequence[int],
    k: int,
    eps0: Targets,
    params: SystemParams,
    n_bounds: tuple[int, int],
    quad: Optional[QuadratureConfig] = None,
) -> list[SweepRow]:
    """每個 (ε0, v) 的最小 n；不可行的列 n_min 為 None。"""
    vs = validate_grid("v_grid", v_grid, 0)
    rows = []
    for target in _targets(eps0):
        for v in vs:
            n_min = min_n_for_target(int(v), k, target, params, n_bounds, quad)
            coords = {"k": k, "eps0": target, "v": int(v), "n_min": n_min}
            if n_min is None:
                rows.append(SweepRow(coords=coords, feasible=False))
                continue
            plan = BlockPlan(n=n_min, v=int(v), k=k)
            b = breakdown_grid(n_min, k, [int(v)], params, quad).breakdown(0)
            rows.append(SweepRow(coords=coords, breakdown=b, performance=performance_point(plan, params, b)))
    return rows


def min_delay_vs_k(
    k_grid: Sequence[int],
    eps0: Targets,
    params: SystemParams,
    n_grid: Sequence[int],
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
    workers: int = 1,
    delay_budget: Optional[float] = None,
) -> list[SweepRow]:
    """每個 (k, ε0) 的 δ*；給了 delay_budget 時多一欄 within_budget。"""
    ks = validate_grid("k_grid", k_grid, 1)
    targets = _targets(eps0)
    rows = []
    for k in ks:
        grid = evaluate_grid(int(k), params, n_grid, v_grid, quad, workers)
        for target in targets:
            opt = min_delay(int(k), target, params, n_grid, v_grid, rows=grid)
            extra = {"delta_seconds": opt.delta_seconds(params)}
            if delay_budget is not None:
                extra["within_budget"] = bool(opt.feasible and opt.delta <= delay_budget)
            rows.append(SweepRow(coords={"k": int(k), "eps0": target}, optimum=opt, feasible=opt.feasible, extra=extra))
    return rows


def max_k_under_budget(rows: Sequence[SweepRow], eps0: float, delay_budget: float) -> Optional[int]:
    """min_delay_vs_k 的結果中，ε0 下 δ* <= delay_budget 的最大 k；沒有則為 None。"""
    ok = [
        row.coords["k"]
        for row in rows
        if row.coords["eps0"] == eps0 and row.optimum is not None and row.feasible and row.optimum.delta <= delay_budget
    ]
    return max(ok) if ok else None


def blocklength_profile(
    k: int,
    eps0: Targets,
    params: SystemParams,
    n_grid: Sequence[int],
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
    workers: int = 1,
) -> list[SweepRow]:
    """每個 (ε0, n) 的 τ*(n) 與 α*(n)，外加 is_global 標記全域最佳的那一列。"""
    grid = evaluate_grid(k, params, n_grid, v_grid, quad, workers)
    rows = []
    for target in _targets(eps0):
        best = best_from_grid(grid, target)
        for point in best.profile:
            is_global = best.feasible and point.feasible and (point.n, point.v) == (best.n, best.v)
            rows.append(
                SweepRow(
                    coords={"k": k, "eps0": target, "n": point.n},
                    optimum=point,
                    feasible=point.feasible,
                    extra={"is_global": is_global},
                )
            )
    return rows
