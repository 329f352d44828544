# 路徑：tests/test_sweeps.py
# 功能：數值實驗掃描（固定區塊長度、中繼位置、最小 n、δ*(k)、τ*(n) profile）

import math

import numpy as np
import pytest

from src.common.errors import ContractError
from src.model.link import SystemParams
from src.optimize.search import best_blocklength
from src.optimize.sweeps import (
    best_row,
    blocklength_profile,
    fixed_budget_sweep,
    max_k_under_budget,
    min_delay_vs_k,
    min_n_curve,
    relay_position_sweep,
)

DEFAULTS = SystemParams()


def test_fixed_budget_rejects_bad_harvest_times():
    with pytest.raises(ContractError, match="2001"):
        fixed_budget_sweep(2000, 64, DEFAULTS, [1000, 1501, 2001])
    with pytest.raises(ContractError):
        fixed_budget_sweep(2000, 64, DEFAULTS, [2000])


def test_fixed_budget_rows_and_records():
    rows = fixed_budget_sweep(2000, 64, DEFAULTS, [0, 1000, 1500])
    assert [row.coords["n"] for row in rows] == [1000, 500, 250]
    zero = rows[0].as_record()
    assert zero["e_df"] == 1.0 and zero["throughput"] == 0.0 and math.isinf(zero["delay"])
    rec = rows[2].as_record()
    assert rec["alpha"] == pytest.approx(0.75)
    assert rec["throughput"] * rec["delay"] == pytest.approx(64, rel=1e-12)


def test_fixed_budget_minimum_and_payload_ordering():
    v_grid = range(1000, 1901, 20)
    curves = {k: fixed_budget_sweep(2000, k, DEFAULTS, v_grid) for k in (64, 160, 320)}
    best = {k: best_row(rows) for k, rows in curves.items()}
    assert 1.5e-5 <= best[64].breakdown.e_df <= 6e-5
    assert 1200 <= best[64].coords["v"] <= 1800
    assert best[160].breakdown.e_df > best[64].breakdown.e_df
    assert best[320].breakdown.e_df > best[160].breakdown.e_df
    with pytest.raises(ContractError):
        best_row([])


def test_relay_position_profile_is_asymmetric():
    rows = relay_position_sweep(
        160, [1.0, 1e-3], DEFAULTS, 2.0, [0.5, 1.0, 1.5], range(300, 701, 100), range(500, 3001, 250)
    )
    assert len(rows) == 6
    assert all(row.coords["d2"] == pytest.approx(2.0 - row.coords["d1"]) for row in rows)
    unconstrained = {row.coords["d1"]: row.optimum.delta for row in rows if row.coords["eps0"] == 1.0}
    assert not math.isclose(unconstrained[0.5], unconstrained[1.5], rel_tol=1e-6)
    assert "within_budget" not in rows[0].extra


def test_min_n_curve_decreases_with_harvest_time():
    rows = min_n_curve([0, 6000, 7000, 8000], 160, 1e-5, DEFAULTS, (100, 3000))
    assert rows[0].coords["n_min"] is None and not rows[0].feasible
    n_mins = [row.coords["n_min"] for row in rows[1:]]
    assert all(n is not None for n in n_mins)
    assert 850 <= n_mins[0] <= 1150
    assert np.all(np.diff(n_mins) <= 0)
    assert all(row.breakdown.e_df <= 1e-5 for row in rows[1:])


def test_min_delay_vs_k_budget_flags():
    rows = min_delay_vs_k([64, 160], [1e-3], DEFAULTS, range(200, 601, 50), range(500, 2001, 100), delay_budget=2000)
    assert [row.coords["k"] for row in rows] == [64, 160]
    for row in rows:
        assert row.extra["within_budget"] == (row.feasible and row.optimum.delta <= 2000)
    k_max = max_k_under_budget(rows, 1e-3, 2000)
    assert k_max in (None, 64, 160)
    assert max_k_under_budget(rows, 1e-4, 2000) is None


def test_blocklength_profile_marks_one_global_row():
    rows = blocklength_profile(160, [1e-4], DEFAULTS, range(300, 701, 100), range(500, 3001, 250))
    assert [row.coords["n"] for row in rows] == [300, 400, 500, 600, 700]
    assert sum(row.extra["is_global"] for row in rows) == 1
    best = max((row for row in rows if row.feasible), key=lambda row: row.optimum.tau)
    assert best.extra["is_global"]


@pytest.mark.slow
@pytest.mark.parametrize(
    "eps0, k_grid, n_grid, v_grid, band",
    [
        (1e-4, range(100, 151, 10), range(200, 601, 5), range(800, 1601, 10), (110, 150)),
        (1e-3, range(300, 401, 25), range(250, 701, 5), range(500, 1501, 10), (300, 400)),
    ],
)
def test_max_payload_under_delay_budget(eps0, k_grid, n_grid, v_grid, band):
    rows = min_delay_vs_k(k_grid, eps0, DEFAULTS, n_grid, v_grid, delay_budget=2000)
    k_max = max_k_under_budget(rows, eps0, 2000)
    assert k_max is not None
    assert band[0] <= k_max <= band[1]


@pytest.mark.slow
def test_relay_position_feasibility_boundary():
    d1_grid = np.round(np.arange(0.25, 0.851, 0.05), 2)
    rows = relay_position_sweep(
        160, [1e-4, 1e-5], DEFAULTS, 2.0, d1_grid, range(200, 601, 10), range(600, 1701, 10), delay_budget=2000
    )
    for eps0, band in ((1e-4, (0.55, 0.75)), (1e-5, (0.25, 0.45))):
        mine = [row for row in rows if row.coords["eps0"] == eps0]
        flags = [row.feasible for row in mine]
        assert any(flags)
        boundary = max(row.coords["d1"] for row in mine if row.feasible)
        assert band[0] <= boundary <= band[1]
        # 可行的 d1 形成前綴
        assert flags == sorted(flags, reverse=True)
        delays = [row.optimum.delta for row in mine if row.feasible]
        assert np.all(np.diff(delays) >= 0)


@pytest.mark.slow
def test_optimum_throughput_independent_of_payload():
    small = best_blocklength(160, 1e-5, DEFAULTS, range(700, 1401, 25), range(4000, 9001, 50))
    large = best_blocklength(320, 1e-5, DEFAULTS, range(1400, 2801, 50), range(8000, 18001, 100))
    assert small.feasible and large.feasible
    assert large.tau == pytest.approx(small.tau, rel=0.05)
