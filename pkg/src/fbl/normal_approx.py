# 檔名：normal_approx.py
# 專案路徑：src/fbl/normal_approx.py
# 功能：有限碼長基本量：Shannon 容量、通道離散度、Q 函數、常態近似區塊錯誤率。
#
# 所有函式皆可接受純量或 numpy 陣列；純量輸入回傳 float。

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from src.common.errors import ContractError

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2

# γ 低於此值視為零接收功率，錯誤率直接為 1（z-score 分子分母同時趨近 0）
SNR_FLOOR = 1e-12
# z-score 高於此值時錯誤率直接為 0，避免次正規數雜訊
Z_UNDERFLOW = 40.0
# 常態近似在 n >= 100 才算可靠
MIN_RELIABLE_BLOCKLENGTH = 100

# snr_threshold 的二分搜尋範圍（ln γ）
_LN_GAMMA_BRACKET = (-700.0, 700.0)
_BISECTION_STEPS = 90


def _out(x):
    arr = np.asarray(x)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class FblPoint:
    """常態近似的一個評估點：SNR γ、碼率 r、碼長 n。"""

    gamma: float
    r: float
    n: int

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise ContractError(f"gamma 必須 >= 0，實得 {self.gamma}")
        if not self.r > 0:
            raise ContractError(f"r 必須 > 0，實得 {self.r}")
        if not self.n >= 1:
            raise ContractError(f"n 必須 >= 1，實得 {self.n}")


def shannon_capacity(gamma):
    """C(γ) = log2(1+γ)。"""
    return _out(np.log1p(np.asarray(gamma, dtype=float)) / LN2)


def channel_dispersion(gamma):
    """V(γ) = (1 - 1/(1+γ)²)(log2 e)²；以 expm1/log1p 保持小 γ 的精度。"""
    g = np.asarray(gamma, dtype=float)
    return _out(-np.expm1(-2.0 * np.log1p(g)) * LOG2E**2)


def qfunc(z):
    """高斯尾端機率 Q(z) = erfc(z/√2)/2。"""
    return _out(0.5 * erfc(np.asarray(z, dtype=float) / math.sqrt(2.0)))


def z_score(gamma, r: float, n: int):
    """(C(γ) - r)/√(V(γ)/n)；γ=0 時為 -inf。"""
    g = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (np.log1p(g) / LN2 - r) / np.sqrt(-np.expm1(-2.0 * np.log1p(g)) * LOG2E**2 / n)
    return _out(z)


def block_error(gamma, r: float, n: int):
    """
    常態近似區塊錯誤率 Q(z(γ))，向量化版本。
    - γ <= SNR_FLOOR 時為 1
    - z > Z_UNDERFLOW 時為 0
    - 結果夾在 [0,1]；NaN 會原樣傳出，讓呼叫端自行判斷
    """
    g = np.asarray(gamma, dtype=float)
    z = np.asarray(z_score(g, r, n), dtype=float)
    eps = 0.5 * erfc(z / math.sqrt(2.0))
    eps = np.where(z > Z_UNDERFLOW, 0.0, eps)
    eps = np.where(g <= SNR_FLOOR, 1.0, eps)
    return _out(np.clip(eps, 0.0, 1.0))


def fbl_error(point: FblPoint) -> float:
    """單點錯誤率，語意同 block_error。"""
    return float(block_error(point.gamma, point.r, point.n))


def snr_threshold(z, r: float, n: int):
    """
    z_score 的反函數：回傳使 z(γ) = z 的 γ。

    z(γ) 對 γ 嚴格遞增（r > 0），因此以 ln γ 做向量化二分搜尋。
    超出搜尋範圍時回傳範圍端點（約 1e-304 或 1e304）。
    """
    target = np.asarray(z, dtype=float)
    lo = np.full(target.shape, _LN_GAMMA_BRACKET[0])
    hi = np.full(target.shape, _LN_GAMMA_BRACKET[1])
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = np.asarray(z_score(np.exp(mid), r, n)) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return _out(np.exp(0.5 * (lo + hi)))


def is_reliable_blocklength(n: int) -> bool:
    return n >= MIN_RELIABLE_BLOCKLENGTH
