# 檔名：error_model.py
# 專案路徑：src/analysis/error_model.py
# 功能：衰落平均錯誤率 E[ε_r]、E[ε_d]、E[ε_r ε_d]、E[ε_DF]，以及吞吐量與延遲。
#
# 兩種積分方案（QuadratureConfig.scheme）：
# - lattice（預設）：h 積分用 ln h 上的等距梯形格點；格點與 c_d·h 的對數對齊，
#   因此 g 積分 Ψ(c_d·h) 只要在一條共用的格點上算一次。
#   Ψ(c) = E_x[ε(c·x)] 改寫成先對 t 積分：E_t[F_m(γ*(t)/c)]，
#   其中 γ*(t) 為 z-score 的反函數，F_m 為 Gamma CDF（封閉形式）。
# - laguerre：廣義 Gauss–Laguerre 張量積規則。

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy.special import gammainc

from src.analysis.quadrature import (
    DEFAULT_NODES,
    gamma_expectation,
    gamma_expectation_2d,
    gamma_log_bounds,
    log_gamma_density,
    standard_normal_rule,
)
from src.common.errors import ContractError, InfiniteDelayError, IntegrationError
from src.fbl.normal_approx import LN2, MIN_RELIABLE_BLOCKLENGTH, SNR_FLOOR, block_error, snr_threshold, z_score
from src.model.link import BlockPlan, SystemParams

SCHEMES = ("lattice", "laguerre")
BREAKDOWN_TOL = 1e-12
# lattice 在 v 方向每次處理的列數（限制暫存陣列大小）
_V_CHUNK = 256
# 格點步長上限：每個 z-score 單位至少 1/0.6 個點
_SLOPE_RESOLUTION = 0.6


@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = DEFAULT_NODES
    scheme: str = "lattice"

    def __post_init__(self) -> None:
        if self.nodes < 8:
            raise ContractError(f"積分節點數必須 >= 8，實得 {self.nodes}")
        if self.scheme not in SCHEMES:
            raise ContractError(f"未知的積分方案 {self.scheme!r}，可用：{', '.join(SCHEMES)}")


@dataclass(frozen=True)
class ErrorBreakdown:
    """
    DF 兩段鏈路的四個衰落平均錯誤項。
    建構時檢查：皆在 [0,1]、e_rd <= min(e_r, e_d)、e_df = e_r + e_d - e_rd、
    max(e_r, e_d) <= e_df <= min(1, e_r + e_d)（容許 1e-12 誤差）。
    """

    e_r: float
    e_d: float
    e_rd: float
    e_df: float

    def __post_init__(self) -> None:
        tol = BREAKDOWN_TOL
        values = (self.e_r, self.e_d, self.e_rd, self.e_df)
        if not all(np.isfinite(values)):
            raise IntegrationError(f"錯誤率出現非有限值：{values}")
        checks = (
            all(-tol <= x <= 1 + tol for x in values),
            self.e_rd <= min(self.e_r, self.e_d) + tol,
            abs(self.e_df - (self.e_r + self.e_d - self.e_rd)) <= tol,
            max(self.e_r, self.e_d) - tol <= self.e_df <= min(1.0, self.e_r + self.e_d) + tol,
        )
        if not all(checks):
            raise IntegrationError(f"ErrorBreakdown 代數關係不成立：{self}")

    @classmethod
    def from_terms(cls, e_r: float, e_d: float, e_rd: float) -> "ErrorBreakdown":
        e_r = min(max(float(e_r), 0.0), 1.0)
        e_d = min(max(float(e_d), 0.0), 1.0)
        e_rd = min(max(float(e_rd), 0.0), e_r, e_d)
        return cls(e_r=e_r, e_d=e_d, e_rd=e_rd, e_df=e_r + (e_d - e_rd))


@dataclass(frozen=True)
class PerformancePoint:
    throughput: float  # bits / channel use
    delay: float  # channel uses
    delay_seconds: float


@dataclass(frozen=True)
class BreakdownGrid:
    """固定 (n, k) 下，一串 v 的錯誤項（numpy 陣列，與 v 等長）。"""

    n: int
    k: int
    v: np.ndarray
    e_r: np.ndarray
    e_d: np.ndarray
    e_rd: np.ndarray
    e_df: np.ndarray

    def __len__(self) -> int:
        return int(self.v.size)

    @property
    def total(self) -> np.ndarray:
        return 2 * self.n + self.v

    @property
    def throughput(self) -> np.ndarray:
        return (1.0 - self.e_df) * self.k / self.total

    def breakdown(self, i: int) -> ErrorBreakdown:
        return ErrorBreakdown(
            e_r=float(self.e_r[i]), e_d=float(self.e_d[i]), e_rd=float(self.e_rd[i]), e_df=float(self.e_df[i])
        )

    def plan(self, i: int) -> BlockPlan:
        return BlockPlan(n=self.n, v=int(self.v[i]), k=self.k)


def _relay_gain(params: SystemParams) -> float:
    return params.ps / (params.path_loss_1 * params.sigma2_r)


def _dest_gain(n: int, v: np.ndarray, params: SystemParams) -> np.ndarray:
    # γ_d = c_d·h·g
    return params.eta * params.ps * v / (params.path_loss_1 * params.path_loss_2 * params.sigma2_d * n)


def _lattice_step(r: float, n: int, nodes: int) -> float:
    """ln h 格點步長：3/nodes，若門檻附近 z-score 對 ln γ 太陡則再加密。"""
    step = 3.0 / nodes
    g_th = float(np.expm1(r * LN2))
    if not np.isfinite(g_th) or g_th <= 0:
        return step
    delta = 1e-3
    slope = (z_score(g_th * np.exp(delta), r, n) - z_score(g_th * np.exp(-delta), r, n)) / (2 * delta)
    if np.isfinite(slope) and slope > 0:
        step = min(step, _SLOPE_RESOLUTION / slope)
    return step


def faded_block_error(mean_snr, r: float, n: int, m: float, nodes: int = DEFAULT_NODES):
    """
    單段鏈路的衰落平均錯誤率 E_x[ε(c·x)]，x ~ Gamma(m, 1/m)，c 為平均 SNR。

    先積 t：ε(γ) = P[T > z(γ)] = P[γ < γ*(T)]，T ~ N(0,1)，
    所以 E_x[ε(c·x)] = E_T[F_m(γ*(T)/c)]。c 可為陣列；c = 0 時為 1。
    """
    t, w = standard_normal_rule(nodes)
    g_star = np.maximum(snr_threshold(t, r, n), SNR_FLOOR)
    c = np.asarray(mean_snr, dtype=float)
    with np.errstate(divide="ignore"):
        ratio = g_star / c[..., None]
    out = gammainc(m, m * ratio) @ w
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"faded_block_error 出現非有限值（r={r}, n={n}, m={m}）")
    return float(out) if np.ndim(out) == 0 else out


def _lattice_chunk(n: int, k: int, v: np.ndarray, params: SystemParams, quad: QuadratureConfig):
    m = params.m
    r = k / n
    # t 方向的 Hermite 節點，以及每個節點對應的門檻 SNR γ*(t)
    t, wt = standard_normal_rule(quad.nodes)
    g_star = np.maximum(snr_threshold(t, r, n), SNR_FLOOR)
    # ln h 的步長與截斷範圍；count 為每列格點數（各列相同）
    step = _lattice_step(r, n, quad.nodes)
    s_lo, s_hi = gamma_log_bounds(m)
    count = int(np.floor((s_hi - s_lo) / step)) + 2

    c_d = _dest_gain(n, v.astype(float), params)
    active = c_d > 0
    ln_c = np.log(np.where(active, c_d, 1.0))  # v = 0 的列先用 1 佔位

    # 第 i 列的格點 s = j·step - ln c_d[i]，使 c_d·h = e^{j·step} 落在共用格點上
    j0 = np.ceil((s_lo + ln_c) / step).astype(np.int64)
    j = j0[:, None] + np.arange(count)[None, :]
    s = j * step - ln_c[:, None]

    # 梯形權重：f(h)·h 在 ln h 上，逐列正規化成總和 1
    weights = np.exp(log_gamma_density(s, m))
    weights /= weights.sum(axis=1, keepdims=True)

    # 中繼端錯誤率直接在格點上評估
    eps_r = block_error(_relay_gain(params) * np.exp(s), r, n)

    # 目的端：Ψ(y) 只在共用格點 y = e^{j·step} 上算一次，再依 j 取回各列
    j_min = int(j.min())
    y = np.exp(np.arange(j_min, int(j.max()) + 1) * step)
    psi = gammainc(m, m * g_star[None, :] / y[:, None]) @ wt
    eps_d = psi[j - j_min]

    e_r = np.sum(weights * eps_r, axis=1)
    e_d = np.sum(weights * eps_d, axis=1)
    e_rd = np.sum(weights * eps_r * eps_d, axis=1)  # 同一個 h，保留相關性
    # v = 0：目的端功率為零
    e_d = np.where(active, e_d, 1.0)
    e_rd = np.where(active, e_rd, e_r)
    return e_r, e_d, e_rd


@lru_cache(maxsize=1)
def warn_laguerre_blocklength() -> None:
    """每個行程只警告一次。"""
    logger.warning(
        f"laguerre 方案在 n >= {MIN_RELIABLE_BLOCKLENGTH} 時節點解析不到錯誤率門檻，"
        "E[ε_r] 可能低估數百個數量級；請改用 scheme = lattice"
    )


def _laguerre_chunk(n: int, k: int, v: np.ndarray, params: SystemParams, quad: QuadratureConfig):
    m = params.m
    r = k / n
    c_r = _relay_gain(params)
    c_d = _dest_gain(n, v.astype(float), params)
    e_r_value = gamma_expectation(lambda h: block_error(c_r * h, r, n), m, quad.nodes)

    def terms(h, g):
        eps_r = block_error(c_r * h, r, n)[..., None]
        eps_d = block_error(c_d * (h * g)[..., None], r, n)
        return np.stack([eps_d, eps_r * eps_d], axis=-1)

    out = np.asarray(gamma_expectation_2d(terms, m, quad.nodes))
    e_d = np.where(c_d > 0, out[:, 0], 1.0)
    e_r = np.full(v.shape, e_r_value)
    e_rd = np.where(c_d > 0, out[:, 1], e_r)
    return e_r, e_d, e_rd


def breakdown_grid(
    n: int,
    k: int,
    v_values: Sequence[int],
    params: SystemParams,
    quad: Optional[QuadratureConfig] = None,
) -> BreakdownGrid:
    """
    固定 (n, k)，對一串 v 一次算出四個錯誤項。

    回傳的 e_df 以 e_r + (e_d - e_rd) 組合，並夾到 [0, 1]。
    """
    quad = quad or QuadratureConfig()
    BlockPlan(n=n, v=0, k=k)
    v = np.asarray(v_values, dtype=np.int64).reshape(-1)
    if v.size == 0:
        raise ContractError("v_values 不可為空")
    if np.any(v < 0):
        raise ContractError(f"v 必須 >= 0，實得 {v.min()}")

    if quad.scheme == "laguerre" and n >= MIN_RELIABLE_BLOCKLENGTH:
        warn_laguerre_blocklength()
    chunk_fn = _lattice_chunk if quad.scheme == "lattice" else _laguerre_chunk
    parts = [chunk_fn(n, k, v[i : i + _V_CHUNK], params, quad) for i in range(0, v.size, _V_CHUNK)]
    e_r, e_d, e_rd = (np.concatenate(cols) for cols in zip(*parts))

    e_r = np.clip(e_r, 0.0, 1.0)
    e_d = np.clip(e_d, 0.0, 1.0)
    e_rd = np.minimum(np.clip(e_rd, 0.0, 1.0), np.minimum(e_r, e_d))
    e_df = np.minimum(e_r + (e_d - e_rd), 1.0)
    # e_d = 1 時 e_rd 與 e_r 逐位相同，直接固定為 1
    e_df = np.where(e_d >= 1.0, 1.0, e_df)
    for name, arr in (("e_r", e_r), ("e_d", e_d), ("e_rd", e_rd)):
        if not np.all(np.isfinite(arr)):
            raise IntegrationError(f"{name} 出現非有限值（n={n}, k={k}, scheme={quad.scheme}）")

    logger.debug(f"breakdown_grid n={n} k={k} |v|={v.size} scheme={quad.scheme} min e_df={e_df.min():.3e}")
    return BreakdownGrid(n=n, k=k, v=v, e_r=e_r, e_d=e_d, e_rd=e_rd, e_df=e_df)


def expected_error_df(plan: BlockPlan, params: SystemParams, quad: Optional[QuadratureConfig] = None) -> ErrorBreakdown:
    """E[ε_DF] = E[ε_r] + E[ε_d] - E[ε_r ε_d]，連同三個分項一起回傳。"""
    return breakdown_grid(plan.n, plan.k, [plan.v], params, quad).breakdown(0)


def expected_error_relay(plan: BlockPlan, params: SystemParams, quad: Optional[QuadratureConfig] = None) -> float:
    return expected_error_df(plan, params, quad).e_r


def expected_error_dest(plan: BlockPlan, params: SystemParams, quad: Optional[QuadratureConfig] = None) -> float:
    return expected_error_df(plan, params, quad).e_d


def expected_error_joint(plan: BlockPlan, params: SystemParams, quad: Optional[QuadratureConfig] = None) -> float:
    # 兩個因子共用同一個 h，保留 γ_r 與 γ_d 的相關性
    return expected_error_df(plan, params, quad).e_rd


def _resolve(plan, params, quad, breakdown):
    return breakdown if breakdown is not None else expected_error_df(plan, params, quad)


def throughput(
    plan: BlockPlan,
    params: SystemParams,
    quad: Optional[QuadratureConfig] = None,
    breakdown: Optional[ErrorBreakdown] = None,
) -> float:
    """τ = (1 - E[ε_DF])·k/(2n+v)。"""
    b = _resolve(plan, params, quad, breakdown)
    return (1.0 - b.e_df) * plan.k / plan.total


def delay(
    plan: BlockPlan,
    params: SystemParams,
    quad: Optional[QuadratureConfig] = None,
    breakdown: Optional[ErrorBreakdown] = None,
) -> float:
    """δ = (2n+v)/(1 - E[ε_DF])，單位 channel use；E[ε_DF] = 1 時丟 InfiniteDelayError。"""
    b = _resolve(plan, params, quad, breakdown)
    if b.e_df >= 1.0:
        raise InfiniteDelayError(f"E[ε_DF] = 1，延遲為無限大（n={plan.n}, v={plan.v}, k={plan.k}）")
    return plan.total / (1.0 - b.e_df)


def delay_seconds(
    plan: BlockPlan,
    params: SystemParams,
    quad: Optional[QuadratureConfig] = None,
    breakdown: Optional[ErrorBreakdown] = None,
) -> float:
    return delay(plan, params, quad, breakdown) * params.tc


def performance_point(plan: BlockPlan, params: SystemParams, breakdown: ErrorBreakdown) -> Optional[PerformancePoint]:
    """由已算好的 breakdown 組出 PerformancePoint；E[ε_DF] = 1 時回傳 None。"""
    if breakdown.e_df >= 1.0:
        return None
    d = delay(plan, params, breakdown=breakdown)
    return PerformancePoint(
        throughput=throughput(plan, params, breakdown=breakdown),
        delay=d,
        delay_seconds=d * params.tc,
    )
