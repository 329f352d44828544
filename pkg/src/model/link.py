# 檔名：link.py
# 專案路徑：src/model/link.py
# 功能：系統參數、TSR 區塊配置（n, v, k）與逐點 SNR／能量／功率公式。
#
# 單位約定：內部一律以 channel use 計時；T_c 只在把延遲換成秒時使用，
# 因為 T_c 在中繼功率與目的端 SNR 的公式中會消去。

from dataclasses import dataclass, replace
from numbers import Integral
from typing import Sequence

import numpy as np

from src.common.errors import ContractError


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ContractError(message)


@dataclass(frozen=True)
class SystemParams:
    """
    實體層設定（預設值即數值實驗的基準設定）。

    欄位：
    - ps: 來源端發射功率（joule/sec）
    - eta: 能量轉換效率，0 < eta < 1
    - omega: 路徑損耗指數，>= 1
    - d1, d2: S→R、R→D 正規化距離
    - sigma2_r, sigma2_d: 中繼與目的端雜訊變異數
    - m: Nakagami 形狀參數（兩段鏈路共用），>= 0.5
    - tc: 每個 channel use 的時間長度（秒），只用於延遲換算
    """

    ps: float = 1.0
    eta: float = 0.5
    omega: float = 2.7
    d1: float = 1.0
    d2: float = 1.0
    sigma2_r: float = 0.01
    sigma2_d: float = 0.01
    m: float = 2.0
    tc: float = 2e-6

    def __post_init__(self) -> None:
        _require(self.ps > 0, f"ps 必須 > 0，實得 {self.ps}")
        _require(0 < self.eta < 1, f"eta 必須介於 (0,1)，實得 {self.eta}")
        _require(self.omega >= 1, f"omega 必須 >= 1，實得 {self.omega}")
        _require(self.d1 > 0 and self.d2 > 0, f"距離必須 > 0，實得 d1={self.d1}, d2={self.d2}")
        _require(self.sigma2_r > 0 and self.sigma2_d > 0, "雜訊變異數必須 > 0")
        _require(self.m >= 0.5, f"Nakagami m 必須 >= 0.5，實得 {self.m}")
        _require(self.tc > 0, f"tc 必須 > 0，實得 {self.tc}")

    @property
    def path_loss_1(self) -> float:
        return float(self.d1**self.omega)

    @property
    def path_loss_2(self) -> float:
        return float(self.d2**self.omega)

    def with_relay_position(self, d1: float, d_total: float) -> "SystemParams":
        """回傳中繼移到 d1、d2 = d_total - d1 的新參數。"""
        _require(0 < d1 < d_total, f"d1 必須介於 (0, {d_total})，實得 {d1}")
        return replace(self, d1=float(d1), d2=float(d_total - d1))


@dataclass(frozen=True)
class BlockPlan:
    """
    一個 TSR 區塊：v 個 channel use 做無線充電，接著兩段各 n 個 channel use 傳 k 位元。
    """

    n: int
    v: int
    k: int

    def __post_init__(self) -> None:
        for name in ("n", "v", "k"):
            value = getattr(self, name)
            _require(
                isinstance(value, Integral) and not isinstance(value, bool),
                f"{name} 必須為整數 channel use／位元數，實得 {value!r}",
            )
        _require(self.n >= 1, f"n 必須 >= 1，實得 {self.n}")
        _require(self.v >= 0, f"v 必須 >= 0，實得 {self.v}")
        _require(self.k >= 1, f"k 必須 >= 1，實得 {self.k}")

    @property
    def total(self) -> int:
        return 2 * self.n + self.v

    @property
    def alpha(self) -> float:
        return self.v / self.total

    @property
    def rate(self) -> float:
        return self.k / self.n


@dataclass(frozen=True)
class ChannelDraw:
    """單一區塊的通道平方增益 h（S→R）與 g（R→D）。"""

    h: float
    g: float

    def __post_init__(self) -> None:
        _require(self.h >= 0 and self.g >= 0, f"通道增益必須 >= 0，實得 h={self.h}, g={self.g}")


def alpha(plan: BlockPlan) -> float:
    """充電時間比例 v/(2n+v)。"""
    return plan.alpha


def coding_rate(plan: BlockPlan) -> float:
    """編碼率 k/n（bits per channel use）。"""
    return plan.rate


def snr_relay(h, params: SystemParams):
    """中繼端瞬時 SNR：P_s·h/(d1^ω·σ_r²)。h 可為純量或 numpy 陣列。"""
    return params.ps * h / (params.path_loss_1 * params.sigma2_r)


def harvested_energy(h, plan: BlockPlan, params: SystemParams):
    """
    充電階段收集到的能量（joule）：η·P_s·h·v·T_c/d1^ω。
    區塊長度 T = (2n+v)T_c 與 α 的分母互相抵消。
    """
    return params.eta * params.ps * h * plan.v * params.tc / params.path_loss_1


def harvest_gain(plan: BlockPlan, params: SystemParams) -> float:
    # 單位 h 對應的中繼發射功率 η·P_s·v/(d1^ω·n)
    return params.eta * params.ps * plan.v / (params.path_loss_1 * plan.n)


def relay_power_approx(h, plan: BlockPlan, params: SystemParams):
    """L=0 近似下的中繼發射功率：只用本區塊收集的能量。"""
    return harvest_gain(plan, params) * h


def relay_power_accumulated(h_history: Sequence[float], plan: BlockPlan, params: SystemParams) -> float:
    """
    累積能量模型下的中繼發射功率。

    h_history 依序為上次中繼發射後每個區塊的 h，最後一筆是本次成功解碼的區塊；
    緩衝區在中繼每次發射後清空，所以功率正比於這段歷史的總和。
    """
    _require(len(h_history) > 0, "h_history 不可為空：至少要包含本次解碼成功的區塊")
    total = float(np.sum(np.asarray(h_history, dtype=float)))
    return harvest_gain(plan, params) * total


def snr_dest(h, g, plan: BlockPlan, params: SystemParams, relay_power=None):
    """
    目的端瞬時 SNR。
    - relay_power 為 None：近似模型 η·P_s·h·g·v/(d1^ω·d2^ω·σ_d²·n)
    - 否則使用給定的中繼功率：P_r·g/(d2^ω·σ_d²)
    """
    if relay_power is None:
        relay_power = relay_power_approx(h, plan, params)
    return relay_power * g / (params.path_loss_2 * params.sigma2_d)


def link_snrs(draw: ChannelDraw, plan: BlockPlan, params: SystemParams) -> tuple[float, float]:
    """一次回傳 (γ_r, γ_d)，γ_d 採 L=0 近似功率。"""
    return float(snr_relay(draw.h, params)), float(snr_dest(draw.h, draw.g, plan, params))


def pmf_failure_run(z: int, eps_r_sequence: Sequence[float]) -> float:
    """
    連續 z 個區塊中繼解碼失敗、第 z+1 個成功的機率。

    eps_r_sequence[j] 是自起點算起第 j 個區塊的中繼錯誤率，長度至少 z+1。
    """
    _require(isinstance(z, Integral) and z >= 0, f"z 必須為非負整數，實得 {z!r}")
    eps = np.asarray(eps_r_sequence, dtype=float)
    _require(eps.ndim == 1 and eps.size >= z + 1, f"eps_r_sequence 長度不足以涵蓋 z={z}")
    _require(bool(np.all((eps >= 0) & (eps <= 1))), "eps_r_sequence 內的機率必須介於 [0,1]")
    return float((1.0 - eps[z]) * np.prod(eps[:z]))


def pmf_failure_run_constant(z: int, eps_r: float) -> float:
    """中繼錯誤率固定為 eps_r 時的幾何分佈 PMF。"""
    return pmf_failure_run(z, [eps_r] * (z + 1))


def failure_run_tail(z_max: int, eps_r: float) -> float:
    """P(L > z_max) = eps_r^(z_max+1)；截斷加總用的尾端質量。"""
    _require(0 <= eps_r <= 1, f"eps_r 必須介於 [0,1]，實得 {eps_r}")
    return float(eps_r ** (z_max + 1))
