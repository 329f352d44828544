# 路徑：tests/test_quadrature.py
# 功能：Gamma 期望值積分規則（Laguerre／Hermite 節點、截斷範圍、錯誤處理）

import numpy as np
import pytest
from scipy.special import gammainc, gammaincc

from src.analysis.quadrature import (
    gamma_expectation,
    gamma_expectation_2d,
    gamma_log_bounds,
    generalized_laguerre_rule,
    log_gamma_density,
    standard_normal_rule,
)
from src.common.errors import ContractError, IntegrationError


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0, 3.5])
def test_gamma_moments(m):
    assert gamma_expectation(lambda z: np.ones_like(z), m) == pytest.approx(1.0, rel=1e-12)
    assert gamma_expectation(lambda z: z, m) == pytest.approx(1.0, rel=1e-9)
    assert gamma_expectation(lambda z: z**2, m) == pytest.approx(1.0 + 1.0 / m, rel=1e-9)


@pytest.mark.parametrize("m", [1.0, 2.0, 4.0])
def test_gamma_laplace_transform(m):
    # E[e^{-Z}] = (m/(m+1))^m
    assert gamma_expectation(lambda z: np.exp(-z), m) == pytest.approx((m / (m + 1.0)) ** m, rel=1e-10)


def test_vector_valued_integrand_keeps_trailing_axes():
    out = gamma_expectation(lambda z: np.stack([z, z**2], axis=-1), 2.0)
    np.testing.assert_allclose(out, [1.0, 1.5], rtol=1e-9)


def test_two_dimensional_product_moments():
    assert gamma_expectation_2d(lambda h, g: h * g, 2.0) == pytest.approx(1.0, rel=1e-9)
    # E[(HG)²] = (1 + 1/m)²
    assert gamma_expectation_2d(lambda h, g: (h * g) ** 2, 2.0) == pytest.approx(2.25, rel=1e-9)


def test_rules_are_cached_and_read_only():
    x1, w1 = generalized_laguerre_rule(1.0, 32)
    x2, w2 = generalized_laguerre_rule(1.0, 32)
    assert x1 is x2 and w1 is w2
    assert not x1.flags.writeable and not w1.flags.writeable
    assert np.all(x1 > 0) and np.all(np.diff(x1) > 0)
    assert w1.sum() == pytest.approx(1.0, rel=1e-14)


def test_standard_normal_rule_moments():
    t, w = standard_normal_rule(40)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert float(w @ t) == pytest.approx(0.0, abs=1e-12)
    assert float(w @ t**2) == pytest.approx(1.0, rel=1e-10)
    assert float(w @ t**4) == pytest.approx(3.0, rel=1e-10)


@pytest.mark.parametrize("m", [0.5, 2.0, 5.0])
def test_log_bounds_cut_requested_tail_mass(m):
    lo, hi = gamma_log_bounds(m)
    assert lo < 0 < hi
    assert gammainc(m, m * np.exp(lo)) == pytest.approx(1e-18, rel=1e-6)
    assert gammaincc(m, m * np.exp(hi)) == pytest.approx(1e-18, rel=1e-6)


def test_log_density_integrates_to_one():
    lo, hi = gamma_log_bounds(2.0)
    s = np.linspace(lo, hi, 20001)
    mass = np.trapezoid(np.exp(log_gamma_density(s, 2.0)), s)
    assert mass == pytest.approx(1.0, rel=1e-6)


def test_contract_violations():
    with pytest.raises(ContractError):
        gamma_expectation(lambda z: z, 0.4)
    with pytest.raises(ContractError):
        gamma_expectation_2d(lambda h, g: h, 0.3)
    with pytest.raises(ContractError):
        generalized_laguerre_rule(1.0, 1)
    with pytest.raises(ContractError):
        standard_normal_rule(1)


def test_non_finite_integrand_raises():
    with pytest.raises(IntegrationError):
        gamma_expectation(lambda z: np.full_like(z, np.nan), 2.0)
    with pytest.raises(IntegrationError):
        gamma_expectation_2d(lambda h, g: np.full(np.broadcast(h, g).shape, np.inf), 2.0)
