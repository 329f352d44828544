# 路徑：tests/test_search.py
# 功能：受限格點搜尋（最佳 n、α、最小延遲、最小 n）

import numpy as np
import pytest

from src.analysis.error_model import BreakdownGrid, breakdown_grid, expected_error_df
from src.common.errors import ContractError
from src.model.link import BlockPlan, SystemParams
from src.optimize.search import (
    OptimumPoint,
    best_alpha_for_n,
    best_blocklength,
    best_from_grid,
    best_in_row,
    evaluate_grid,
    min_delay,
    min_n_for_target,
    validate_grid,
)

DEFAULTS = SystemParams()


def _row(n: int, k: int, v, e_df) -> BreakdownGrid:
    e_df = np.asarray(e_df, dtype=float)
    zeros = np.zeros_like(e_df)
    return BreakdownGrid(n=n, k=k, v=np.asarray(v), e_r=zeros, e_d=e_df, e_rd=zeros, e_df=e_df)


def test_tie_prefers_smaller_v_then_smaller_n():
    # 三個候選的 τ 都是 0.2
    row_a = _row(10, 8, [0, 20], [0.5, 0.0])
    assert best_in_row(row_a, 0.6).v == 0
    assert best_in_row(row_a, 0.1).v == 20
    row_b = _row(5, 8, [20, 30], [0.25, 0.0])
    row_c = _row(10, 8, [20], [0.0])
    best = best_from_grid([row_c, row_b], 0.3)
    assert (best.n, best.v) == (5, 20)
    assert best_from_grid([row_b, row_c], 0.3) == best
    assert len(best.profile) == 2


def test_infeasible_everywhere():
    rows = evaluate_grid(160, DEFAULTS, [100, 200], [0, 500])
    best = best_from_grid(rows, 1e-300)
    assert not best.feasible
    assert best.n is None and best.tau is None and best.delta is None
    assert best.delta_seconds(DEFAULTS) is None
    assert best.as_record()["feasible"] is False


def test_best_alpha_for_n_respects_target():
    v_grid = range(0, 3001, 100)
    point = best_alpha_for_n(500, 160, 1e-3, DEFAULTS, v_grid)
    assert point.feasible and point.n == 500
    assert point.eps_df <= 1e-3
    assert point.alpha == pytest.approx(point.v / (1000 + point.v))
    # 較小的 v 皆不可行或 τ 較低
    b = expected_error_df(BlockPlan(n=500, v=point.v, k=160), DEFAULTS)
    assert b.e_df == pytest.approx(point.eps_df, rel=1e-9)


def test_min_delay_is_the_max_throughput_point():
    n_grid, v_grid = range(200, 801, 100), range(0, 4001, 250)
    rows = evaluate_grid(160, DEFAULTS, n_grid, v_grid)
    best = best_from_grid(rows, 1e-4)
    fastest = min_delay(160, 1e-4, DEFAULTS, n_grid, v_grid, rows=rows)
    assert best.feasible
    assert (fastest.n, fastest.v) == (best.n, best.v)
    assert fastest.delta * fastest.tau == pytest.approx(160, rel=1e-12)
    assert fastest.profile == ()
    assert fastest.delta_seconds(DEFAULTS) == pytest.approx(fastest.delta * 2e-6)


def test_threaded_grid_matches_serial():
    n_grid, v_grid = range(300, 701, 100), range(500, 2501, 500)
    serial = best_blocklength(160, 1e-4, DEFAULTS, n_grid, v_grid, workers=1)
    threaded = best_blocklength(160, 1e-4, DEFAULTS, n_grid, v_grid, workers=3)
    assert serial == threaded


def test_min_n_for_target_bisection():
    n = min_n_for_target(6000, 160, 1e-5, DEFAULTS, (100, 3000))
    assert n is not None and 850 <= n <= 1150
    at = breakdown_grid(n, 160, [6000], DEFAULTS).e_df[0]
    before = breakdown_grid(n - 1, 160, [6000], DEFAULTS).e_df[0]
    assert at <= 1e-5 < before


def test_min_n_for_target_edges():
    assert min_n_for_target(0, 160, 1e-5, DEFAULTS, (100, 400)) is None
    assert min_n_for_target(6000, 160, 0.5, DEFAULTS, (200, 400)) == 200
    with pytest.raises(ContractError):
        min_n_for_target(6000, 160, 1e-5, DEFAULTS, (400, 100))


def test_validation_errors():
    with pytest.raises(ContractError):
        validate_grid("n_grid", [], 1)
    with pytest.raises(ContractError):
        validate_grid("n_grid", [100, 100], 1)
    with pytest.raises(ContractError):
        validate_grid("n_grid", [1.5, 2.5], 1)
    with pytest.raises(ContractError):
        validate_grid("v_grid", [-10, 0], 0)
    with pytest.raises(ContractError):
        best_alpha_for_n(100, 160, 0.0, DEFAULTS, [0, 100])
    with pytest.raises(ContractError):
        best_from_grid([], 1e-3)


def test_optimum_point_record_fields():
    p = OptimumPoint(k=160, eps0=1e-5, feasible=True, n=1000, v=6000, alpha=0.75, tau=0.02, delta=8000.0, eps_df=1e-5)
    assert list(p.as_record()) == ["k", "eps0", "feasible", "n", "v", "alpha", "tau", "delta", "eps_df"]
    assert OptimumPoint.infeasible(160, 1e-5, n=100).n == 100


def test_infeasible_row_keeps_only_its_label():
    labelled = OptimumPoint.infeasible(160, 1e-5, n=100)
    assert labelled.n == 100
    record = labelled.as_record()
    assert all(record[key] is None for key in ("v", "alpha", "tau", "delta", "eps_df"))
    assert OptimumPoint.infeasible(160, 1e-5).n is None


def test_refining_the_grid_never_lowers_throughput():
    coarse_n, coarse_v = range(300, 701, 100), range(500, 2501, 500)
    fine_n, fine_v = range(300, 701, 50), range(500, 2501, 250)
    for eps0 in (1e-2, 1e-3):
        coarse = best_blocklength(160, eps0, DEFAULTS, coarse_n, coarse_v)
        fine = best_blocklength(160, eps0, DEFAULTS, fine_n, fine_v)
        assert coarse.feasible and fine.feasible
        # 細格點包含粗格點的所有點
        assert fine.tau >= coarse.tau * (1 - 1e-12)
        assert fine.delta <= coarse.delta * (1 + 1e-12)


@pytest.mark.slow
def test_headline_operating_point():
    best = best_blocklength(160, 1e-5, DEFAULTS, range(700, 1401, 25), range(4000, 9001, 50))
    assert best.feasible
    assert 5100 <= best.v <= 6900
    assert 6800 <= best.delta <= 9200
    assert 0.0136 <= best.delta_seconds(DEFAULTS) <= 0.0184
    # τ*(n) 在最佳點附近很平，n = 1000 與全域最佳相差不到 1% 也算符合
    at_1000 = next(p for p in best.profile if p.n == 1000)
    assert 850 <= best.n <= 1150 or at_1000.tau >= 0.99 * best.tau
