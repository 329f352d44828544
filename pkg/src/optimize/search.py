# 檔名：search.py
# 專案路徑：src/optimize/search.py
# 功能：受限格點搜尋：在 E[ε_DF] <= ε0 下最大化吞吐量 τ（等價於最小化延遲 δ），
#      以及固定 v 時的最小 n。
#
# 同分規則：τ 相同時取較小的 v，再取較小的 n；與評估順序無關。

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger

from src.analysis.error_model import BreakdownGrid, QuadratureConfig, breakdown_grid
from src.common.errors import ContractError
from src.model.link import SystemParams

IDENTITY_RTOL = 1e-12
# min_n_for_target 線性掃描前的粗格數
_COARSE_PROBES = 64


@dataclass(frozen=True)
class OptimumPoint:
    """
    受限搜尋的結果。feasible 為 False 時 v、alpha、tau、delta、eps_df 皆為 None；
    n 只在 profile 的列中保留，用來標示是哪一個 n 的列，全域結果的 n 也是 None。
    profile 只在 best_blocklength 中填入：每個 n 的最佳點（τ*(n)、α*(n)）。
    """

    k: int
    eps0: float
    feasible: bool
    n: Optional[int] = None
    v: Optional[int] = None
    alpha: Optional[float] = None
    tau: Optional[float] = None
    delta: Optional[float] = None
    eps_df: Optional[float] = None
    profile: tuple = field(default=(), compare=False, repr=False)

    @classmethod
    def infeasible(cls, k: int, eps0: float, n: Optional[int] = None) -> "OptimumPoint":
        return cls(k=k, eps0=eps0, feasible=False, n=n)

    def delta_seconds(self, params: SystemParams) -> Optional[float]:
        return None if self.delta is None else self.delta * params.tc

    def as_record(self) -> dict:
        return {
            "k": self.k,
            "eps0": self.eps0,
            "feasible": self.feasible,
            "n": self.n,
            "v": self.v,
            "alpha": self.alpha,
            "tau": self.tau,
            "delta": self.delta,
            "eps_df": self.eps_df,
        }


def validate_grid(name: str, values: Sequence[int], minimum: int) -> np.ndarray:
    """格點必須非空、嚴格遞增的整數，且 >= minimum。"""
    arr = np.asarray(list(values))
    if arr.size == 0:
        raise ContractError(f"{name} 不可為空")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ContractError(f"{name} 必須為整數格點")
    if np.any(np.diff(arr) <= 0):
        raise ContractError(f"{name} 必須嚴格遞增")
    if arr[0] < minimum:
        raise ContractError(f"{name} 的值必須 >= {minimum}，實得 {arr[0]}")
    return arr.astype(np.int64)


def _point_from_row(grid: BreakdownGrid, i: int, eps0: float) -> OptimumPoint:
    n, v, k = grid.n, int(grid.v[i]), grid.k
    eps = float(grid.e_df[i])
    total = 2 * n + v
    tau = (1.0 - eps) * k / total
    delta = total / (1.0 - eps)
    return OptimumPoint(k=k, eps0=eps0, feasible=True, n=n, v=v, alpha=v / total, tau=tau, delta=delta, eps_df=eps)


def best_in_row(grid: BreakdownGrid, eps0: float) -> OptimumPoint:
    """單一 n 的列中，滿足 ε0 且 τ 最大的 v（同分取較小 v）。"""
    feasible = grid.e_df <= eps0
    if not np.any(feasible):
        return OptimumPoint.infeasible(grid.k, eps0, n=grid.n)
    tau = np.where(feasible, grid.throughput, -np.inf)
    # v 遞增，argmax 取第一個最大值
    return _point_from_row(grid, int(np.argmax(tau)), eps0)


def _reduce(points: Sequence[OptimumPoint], k: int, eps0: float) -> OptimumPoint:
    feasible = [p for p in points if p.feasible]
    if not feasible:
        return OptimumPoint.infeasible(k, eps0)
    return min(feasible, key=lambda p: (-p.tau, p.v, p.n))


def evaluate_grid(
    k: int,
    params: SystemParams,
    n_grid: Sequence[int],
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
    workers: int = 1,
) -> list[BreakdownGrid]:
    """對每個 n 算出整列 v 的錯誤項；workers > 1 時以執行緒平行。"""
    ns = validate_grid("n_grid", n_grid, 1)
    vs = validate_grid("v_grid", v_grid, 0)

    def row(n: int) -> BreakdownGrid:
        return breakdown_grid(int(n), k, vs, params, quad)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, ns))
    else:
        rows = [row(n) for n in ns]
    logger.debug(f"evaluate_grid k={k} |n|={ns.size} |v|={vs.size}")
    return rows


def best_from_grid(rows: Sequence[BreakdownGrid], eps0: float) -> OptimumPoint:
    """由 evaluate_grid 的結果挑出全域最佳點，並附上 τ*(n) profile。"""
    if not rows:
        raise ContractError("rows 不可為空")
    _check_eps0(eps0)
    profile = tuple(best_in_row(row, eps0) for row in rows)
    best = _reduce(profile, rows[0].k, eps0)
    return replace(best, profile=profile)


def _check_eps0(eps0: float) -> None:
    if not 0 < eps0 <= 1:
        raise ContractError(f"eps0 必須介於 (0, 1]，實得 {eps0}")


def best_alpha_for_n(
    n: int,
    k: int,
    eps0: float,
    params: SystemParams,
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
) -> OptimumPoint:
    """固定 n，在 v_grid 上最大化 τ（受 E[ε_DF] <= ε0 限制）。"""
    _check_eps0(eps0)
    vs = validate_grid("v_grid", v_grid, 0)
    return best_in_row(breakdown_grid(n, k, vs, params, quad), eps0)


def best_blocklength(
    k: int,
    eps0: float,
    params: SystemParams,
    n_grid: Sequence[int],
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
    workers: int = 1,
) -> OptimumPoint:
    """在 (n, v) 格點上最大化 τ；回傳值的 profile 記錄每個 n 的最佳點。"""
    _check_eps0(eps0)
    return best_from_grid(evaluate_grid(k, params, n_grid, v_grid, quad, workers), eps0)


def min_delay(
    k: int,
    eps0: float,
    params: SystemParams,
    n_grid: Sequence[int],
    v_grid: Sequence[int],
    quad: Optional[QuadratureConfig] = None,
    workers: int = 1,
    rows: Optional[Sequence[BreakdownGrid]] = None,
) -> OptimumPoint:
    """
    最小化 δ = (2n+v)/(1 - E[ε_DF])。δ = k/τ，所以與 best_blocklength 是同一個點；
    這裡沿用相同的挑選與同分規則，並檢查 δ·τ = k。
    """
    _check_eps0(eps0)
    if rows is None:
        rows = evaluate_grid(k, params, n_grid, v_grid, quad, workers)
    best = best_from_grid(rows, eps0)
    if best.feasible and not math.isclose(best.delta, k / best.tau, rel_tol=IDENTITY_RTOL):
        raise AssertionError(f"δ* = {best.delta} 與 k/τ* = {k / best.tau} 不一致")
    return replace(best, profile=())


def _monotone_non_increasing(sampled: dict) -> bool:
    values = [sampled[n] for n in sorted(sampled)]
    return all(b <= a for a, b in zip(values, values[1:]))


def _scan(f: Callable[[int], float], lo: int, hi: int, eps0: float) -> Optional[int]:
    """先以粗步長找第一個可行點，再在前一段區間內逐一檢查。"""
    step = max(1, (hi - lo) // _COARSE_PROBES)
    prev = lo - 1
    for n in range(lo, hi + 1, step):
        if f(n) <= eps0:
            for fine in range(prev + 1, n + 1):
                if f(fine) <= eps0:
                    return fine
        prev = n
    if prev != hi:
        for fine in range(prev + 1, hi + 1):
            if f(fine) <= eps0:
                return fine
    return None


def min_n_for_target(
    v: int,
    k: int,
    eps0: float,
    params: SystemParams,
    n_bounds: tuple[int, int],
    quad: Optional[QuadratureConfig] = None,
) -> Optional[int]:
    """
    n_bounds 內滿足 E[ε_DF] <= ε0 的最小 n；範圍內沒有可行點時回傳 None。

    預設以二分搜尋（假設 ε_DF 對 n 遞減）。若上界不可行，或探測點違反
    單調性，改用粗到細的線性掃描。數值失敗仍以 IntegrationError 丟出。
    """
    _check_eps0(eps0)
    lo, hi = int(n_bounds[0]), int(n_bounds[1])
    if not 1 <= lo <= hi:
        raise ContractError(f"n_bounds 必須滿足 1 <= lo <= hi，實得 {n_bounds}")
    cache: dict[int, float] = {}

    def f(n: int) -> float:
        if n not in cache:
            cache[n] = float(breakdown_grid(n, k, [v], params, quad).e_df[0])
        return cache[n]

    if f(lo) <= eps0:
        return lo
    if f(hi) > eps0:
        logger.debug(f"min_n_for_target v={v}: 上界 n={hi} 不可行，改用線性掃描")
        return _scan(f, lo + 1, hi - 1, eps0)

    a, b = lo, hi
    while b - a > 1:
        mid = (a + b) // 2
        if f(mid) <= eps0:
            b = mid
        else:
            a = mid
    if not _monotone_non_increasing(cache):
        logger.debug(f"min_n_for_target v={v}: 探測點非單調，改用線性掃描")
        return _scan(f, lo + 1, b, eps0)
    return b
