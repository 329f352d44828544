# 檔名：quadrature.py
# 專案路徑：src/analysis/quadrature.py
# 功能：Gamma(m, 1/m) 期望值的數值積分規則。
#
# - generalized_laguerre_rule：Golub–Welsch 特徵值法求廣義 Gauss–Laguerre 節點（指數 m-1）
# - standard_normal_rule：標準常態的 Gauss–Hermite 節點
# - gamma_log_bounds：ln h 的截斷範圍（兩側尾端質量各 1e-18）
# 節點與權重以 lru_cache 快取，且設為唯讀；
# 多執行緒同時初始化時可能重算，但結果相同。

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammainccinv, gammaincinv, gammaln

from src.common.errors import ContractError, IntegrationError

DEFAULT_NODES = 96
TAIL_MASS = 1e-18


def _readonly(*arrays: np.ndarray) -> tuple:
    for a in arrays:
        a.setflags(write=False)
    return arrays


@lru_cache(maxsize=64)
def generalized_laguerre_rule(exponent: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """
    權重 u^exponent·e^{-u}/Γ(exponent+1) 的 Gauss 節點與正規化權重（總和為 1）。

    Jacobi 矩陣：對角 2i+exponent+1，次對角 √(i(i+exponent))；
    權重為特徵向量第一分量的平方。
    """
    if nodes < 2:
        raise ContractError(f"節點數必須 >= 2，實得 {nodes}")
    if exponent <= -1:
        raise ContractError(f"Laguerre 指數必須 > -1，實得 {exponent}")
    i = np.arange(nodes, dtype=float)
    diag = 2.0 * i + exponent + 1.0
    off = np.sqrt(i[1:] * (i[1:] + exponent))
    x, vecs = eigh_tridiagonal(diag, off)
    w = vecs[0, :] ** 2
    return _readonly(x, w / w.sum())


@lru_cache(maxsize=16)
def standard_normal_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """標準常態 N(0,1) 的 Gauss–Hermite 節點與正規化權重。"""
    if nodes < 2:
        raise ContractError(f"節點數必須 >= 2，實得 {nodes}")
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return _readonly(x, w / w.sum())


@lru_cache(maxsize=64)
def gamma_log_bounds(m: float, tail: float = TAIL_MASS) -> tuple[float, float]:
    """Gamma(m, 1/m) 在 ln h 上的截斷區間；區間外兩側質量各為 tail。"""
    lo = gammaincinv(m, tail) / m
    hi = gammainccinv(m, tail) / m
    return float(np.log(lo)), float(np.log(hi))


def log_gamma_density(s: np.ndarray, m: float) -> np.ndarray:
    """h = e^s 時 f(h)·h 的對數，f 為 Gamma(m, 1/m) 密度。"""
    return m * np.log(m) - gammaln(m) + m * s - m * np.exp(s)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise IntegrationError(f"{what} 的被積函數出現非有限值")


def gamma_expectation(f: Callable[[np.ndarray], np.ndarray], m: float, nodes: int = DEFAULT_NODES):
    """
    E[f(Z)]，Z ~ Gamma(m, 1/m)。

    代換 u = m·z 後為廣義 Gauss–Laguerre（指數 m-1）。f 需接受 numpy 陣列，
    輸出的第一軸對應節點；其餘軸原樣保留（可一次積多個函數）。
    """
    if m < 0.5:
        raise ContractError(f"m 必須 >= 0.5，實得 {m}")
    x, w = generalized_laguerre_rule(float(m) - 1.0, nodes)
    values = np.asarray(f(x / m), dtype=float)
    _check_finite(values, "gamma_expectation")
    out = np.tensordot(w, values, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def gamma_expectation_2d(f: Callable[[np.ndarray, np.ndarray], np.ndarray], m: float, nodes: int = DEFAULT_NODES):
    """E[f(H, G)]，H、G 獨立同為 Gamma(m, 1/m)；張量積規則。"""
    if m < 0.5:
        raise ContractError(f"m 必須 >= 0.5，實得 {m}")
    x, w = generalized_laguerre_rule(float(m) - 1.0, nodes)
    z = x / m
    values = np.asarray(f(z[:, None], z[None, :]), dtype=float)
    _check_finite(values, "gamma_expectation_2d")
    out = np.tensordot(np.outer(w, w), values, axes=([0, 1], [0, 1]))
    return float(out) if np.ndim(out) == 0 else out
