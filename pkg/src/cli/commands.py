# 檔名：commands.py
# 專案路徑：src/cli/commands.py
# 功能：CLI 子指令 eval / sweep / optimize / simulate / figure 的實作。
#
# 每個 cmd_* 回傳結束碼；例外交由 main.py 依 exit_code 對應。
# 輸出檔一律寫在 out_dir，並附一份 manifest.yaml（嵌入完整設定文字）。

import math
from pathlib import Path
from typing import Optional

from loguru import logger
from rich.console import Console
from rich.table import Table

from src.analysis.error_model import expected_error_df, performance_point
from src.cli.config import ExperimentConfig, render_config
from src.common.errors import EXIT_OK, ContractError, InfeasibleError
from src.fbl.normal_approx import MIN_RELIABLE_BLOCKLENGTH, is_reliable_blocklength
from src.model.link import BlockPlan, SystemParams
from src.montecarlo.simulator import (
    RARE_EVENT_ERRORS,
    PowerModel,
    SimConfig,
    SimResult,
    compare_power_models,
    empirical_run_pmf,
    run_pmf_reference,
    simulate,
)
from src.optimize.search import best_from_grid, evaluate_grid, min_delay
from src.optimize.sweeps import (
    best_row,
    blocklength_profile,
    fixed_budget_sweep,
    max_k_under_budget,
    min_delay_vs_k,
    min_n_curve,
    relay_position_sweep,
)
from src.reporting.tables import write_manifest, write_table

console = Console()

FIGURES = ("fig2", "fig3", "fig4a", "fig4b", "fig5")
SWEEPS = ("budget", "position")
# 模擬疊加只在 ε0 >= 1e-3 的曲線上做
OVERLAY_MIN_EPS0 = 1e-3
# 支援模擬疊加的圖
OVERLAY_FIGURES = ("fig2", "fig4a", "fig4b")

# 各圖的預設格點與目標；設定檔明確寫過的欄位不會被覆蓋
FIGURE_PRESETS: dict[str, dict[str, dict]] = {
    "fig2": {
        "grid": {"k_values": [160, 320], "n_min": 100, "n_max": 2000, "n_step": 25},
        "targets": {"eps0": [1e-2, 1e-3, 1e-4, 1e-5]},
    },
    "fig3": {
        "grid": {"k_values": [160], "v_min": 250, "v_max": 10000, "v_step": 250, "n_search_min": 20, "n_search_max": 3000},
        "targets": {"eps0": [1e-2, 1e-3, 1e-4, 1e-5]},
    },
    "fig4a": {
        "grid": {"k_values": list(range(16, 513, 16))},
        "targets": {"eps0": [1e-3, 1e-4, 1e-5], "delay_budget": 2000.0},
    },
    "fig4b": {
        "grid": {"k_values": [160], "d_total": 2.0},
        "targets": {"eps0": [1e-4, 1e-5], "delay_budget": 2000.0},
    },
    "fig5": {
        "grid": {"k_values": [64, 160, 320], "total": 2000, "v_min": 0, "v_max": 1998, "v_step": 10},
    },
}


def eps_tag(eps0: float) -> str:
    """檔名用的 ε0 標籤，例如 1e-05。"""
    return f"{eps0:.0e}"


def apply_preset(config: ExperimentConfig, figure_id: str) -> ExperimentConfig:
    if figure_id not in FIGURE_PRESETS:
        raise ContractError(f"未知的 figure id {figure_id!r}，可用：{', '.join(FIGURES)}")
    for section, values in FIGURE_PRESETS[figure_id].items():
        config = config.with_values(section, only_unset=True, **values)
    return config


def _grid_extra(config: ExperimentConfig) -> dict:
    grid = config.grid
    return {
        "seed": config.simulation.seed,
        "nodes": config.quadrature.nodes,
        "scheme": config.quadrature.scheme,
        "n_grid": [grid.n_min, grid.n_max, grid.n_step],
        "v_grid": [grid.v_min, grid.v_max, grid.v_step],
        "k_values": list(grid.k_values),
        "eps0": list(config.targets.eps0),
    }


def _finish(out_dir: Path, command: str, config: ExperimentConfig, files: list[Path], extra: Optional[dict] = None) -> None:
    manifest = write_manifest(out_dir, command, render_config(config), files, {**_grid_extra(config), **(extra or {})})
    for path in files:
        console.print(f"[green][OK][/green] {path}")
    console.print(f"[dim]manifest[/dim]: {manifest}")


def _warn_small_n(n: int) -> None:
    if not is_reliable_blocklength(n):
        logger.warning(f"n={n} < {MIN_RELIABLE_BLOCKLENGTH}：常態近似在短碼長下不一定準確")
        console.print(f"[yellow]注意：n={n} 小於 {MIN_RELIABLE_BLOCKLENGTH}，常態近似可能不準[/yellow]")


def _fmt(x: Optional[float]) -> str:
    return "-" if x is None else f"{x:.6e}"


# ── eval ──────────────────────────────────────────────────────────────


def cmd_eval(config: ExperimentConfig, out_dir: Optional[Path] = None) -> int:
    """單一 (n, v, k) 的錯誤率、吞吐量與延遲。"""
    console.rule("eval")
    params = config.system.to_params()
    plan = config.plan.to_plan()
    _warn_small_n(plan.n)
    b = expected_error_df(plan, params, config.quadrature.to_config())
    perf = performance_point(plan, params, b)

    table = Table(title=f"n={plan.n}, v={plan.v}, k={plan.k} (α={plan.alpha:.4f}, r={plan.rate:.4f})")
    table.add_column("指標")
    table.add_column("數值", justify="right")
    for name, value in (("E[ε_r]", b.e_r), ("E[ε_d]", b.e_d), ("E[ε_r ε_d]", b.e_rd), ("E[ε_DF]", b.e_df)):
        table.add_row(name, _fmt(value))
    if perf is not None:
        table.add_row("τ (bits/ch.use)", _fmt(perf.throughput))
        table.add_row("δ (ch.uses)", _fmt(perf.delay))
        table.add_row("δ (s)", _fmt(perf.delay_seconds))
        table.add_row("τ·δ", f"{perf.throughput * perf.delay:.6f}")
    console.print(table)
    if perf is None:
        console.print("[red]E[ε_DF] = 1：延遲為無限大[/red]")

    if out_dir is not None:
        record = {"n": plan.n, "v": plan.v, "k": plan.k, "alpha": plan.alpha, "e_r": b.e_r, "e_d": b.e_d, "e_rd": b.e_rd, "e_df": b.e_df}
        record.update(
            throughput=perf.throughput if perf else 0.0,
            delay=perf.delay if perf else float("inf"),
            delay_seconds=perf.delay_seconds if perf else float("inf"),
            infinite_delay=perf is None,
        )
        path = write_table([record], Path(out_dir) / "eval.csv")
        _finish(Path(out_dir), "eval", config, [path])
    return EXIT_OK


# ── sweep ─────────────────────────────────────────────────────────────


def _budget_sweep(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    params = config.system.to_params()
    quad = config.quadrature.to_config()
    files = []
    for k in config.grid.k_values:
        rows = fixed_budget_sweep(config.grid.total, k, params, config.grid.budget_v_grid, quad)
        best = best_row(rows)
        console.print(
            f"[cyan]k={k}[/cyan] 最小 E[ε_DF] = {best.breakdown.e_df:.4e} at v={best.coords['v']}, n={best.coords['n']}"
        )
        files.append(write_table([row.as_record() for row in rows], out_dir / f"budget_total{config.grid.total}_k{k}.csv"))
    return files


def _position_sweep(config: ExperimentConfig, out_dir: Path) -> list[Path]:
    params = config.system.to_params()
    quad = config.quadrature.to_config()
    grid = config.grid
    targets = config.targets.eps0
    files = []
    for k in grid.k_values:
        rows = relay_position_sweep(
            k, targets, params, grid.d_total, grid.d1_values, grid.n_grid, grid.v_grid, quad,
            workers=config.simulation.workers, delay_budget=config.targets.delay_budget,
        )
        for eps0 in targets:
            curve = [row for row in rows if row.coords["eps0"] == eps0]
            feasible = [row.coords["d1"] for row in curve if row.feasible]
            edge = f"{max(feasible):.3f}" if feasible else "無"
            console.print(f"[cyan]k={k} ε0={eps0:.0e}[/cyan] 可行的最大 d1 = {edge}")
            files.append(write_table([row.as_record() for row in curve], out_dir / f"position_k{k}_eps{eps_tag(eps0)}.csv"))
    return files


def cmd_sweep(config: ExperimentConfig, out_dir: Path, kind: str = "budget") -> int:
    """budget：固定 2n+v 的 E[ε_DF](v)；position：中繼位置 d1 的 δ*。"""
    console.rule(f"sweep {kind}")
    out_dir = Path(out_dir)
    if kind == "budget":
        files = _budget_sweep(config, out_dir)
    elif kind == "position":
        files = _position_sweep(config, out_dir)
    else:
        raise ContractError(f"未知的 sweep 種類 {kind!r}，可用：{', '.join(SWEEPS)}")
    _finish(out_dir, f"sweep {kind}", config, files)
    return EXIT_OK


# ── optimize ──────────────────────────────────────────────────────────


def cmd_optimize(config: ExperimentConfig, out_dir: Path) -> int:
    """每個 (k, ε0) 的 best_blocklength 與 min_delay；輸出寫完後，任一組不可行就丟 InfeasibleError。"""
    console.rule("optimize")
    out_dir = Path(out_dir)
    params = config.system.to_params()
    quad = config.quadrature.to_config()
    grid = config.grid
    records, files = [], []
    infeasible: list[str] = []

    table = Table(title="受限最佳化（max τ s.t. E[ε_DF] ≤ ε0）")
    for col in ("k", "ε0", "n*", "v*", "α*", "τ*", "δ*", "δ* (s)", "E[ε_DF]"):
        table.add_column(col, justify="right")

    for k in grid.k_values:
        rows = evaluate_grid(k, params, grid.n_grid, grid.v_grid, quad, config.simulation.workers)
        for eps0 in config.targets.eps0:
            best = best_from_grid(rows, eps0)
            shortest = min_delay(k, eps0, params, grid.n_grid, grid.v_grid, rows=rows)
            records.append({**shortest.as_record(), "delta_seconds": shortest.delta_seconds(params)})
            files.append(
                write_table(
                    [{**p.as_record(), "is_global": p == best} for p in best.profile],
                    out_dir / f"profile_k{k}_eps{eps_tag(eps0)}.csv",
                )
            )
            if not shortest.feasible:
                infeasible.append(f"k={k} ε0={eps0:.0e}")
                table.add_row(str(k), f"{eps0:.0e}", *(["-"] * 7))
                continue
            table.add_row(
                str(k),
                f"{eps0:.0e}",
                str(shortest.n),
                str(shortest.v),
                f"{shortest.alpha:.4f}",
                f"{shortest.tau:.6f}",
                f"{shortest.delta:.1f}",
                f"{shortest.delta_seconds(params) * 1e3:.3f} ms",
                _fmt(shortest.eps_df),
            )
    console.print(table)
    files.insert(0, write_table(records, out_dir / "optimize.csv"))
    _finish(out_dir, "optimize", config, files)
    if infeasible:
        raise InfeasibleError(f"格點內沒有可行解：{', '.join(infeasible)}")
    return EXIT_OK


# ── simulate ──────────────────────────────────────────────────────────


def _sim_record(result: SimResult, seed: int) -> dict:
    return {
        "model": result.power_model.value,
        "blocks": result.blocks,
        "seed": seed,
        "errors": result.errors,
        "eps_df_hat": result.eps_df_hat,
        "ci_halfwidth_df": result.ci_halfwidth_df,
        "eps_r_hat": result.eps_r_hat,
        "eps_d_hat": result.eps_d_hat,
        "throughput_hat": result.throughput_hat,
        "delay_hat": result.delay_hat,
        "rare_event": result.rare_event,
    }


def cmd_simulate(config: ExperimentConfig, out_dir: Optional[Path] = None) -> int:
    """Monte Carlo 模擬並附上同一點的解析值；model=both 時多一欄成對差值。"""
    console.rule("simulate")
    params = config.system.to_params()
    plan = config.plan.to_plan()
    _warn_small_n(plan.n)
    sim = config.simulation
    model = sim.model
    sim_config = SimConfig(
        blocks=sim.blocks,
        seed=sim.seed,
        power_model=PowerModel.APPROX if model == "both" else PowerModel(model),
        common_random_numbers=model == "both",
        chunk_size=sim.chunk_size,
        workers=sim.workers,
    )
    analytic = expected_error_df(plan, params, config.quadrature.to_config())

    if model == "both":
        paired = compare_power_models(plan, params, sim_config)
        results = [paired.approx, paired.accumulated]
    else:
        paired = None
        results = [simulate(plan, params, sim_config)]

    records = []
    table = Table(title=f"n={plan.n}, v={plan.v}, k={plan.k}, blocks={sim.blocks}, seed={sim.seed}")
    for col in ("model", "ε̂_DF", "±95%", "解析 E[ε_DF]", "τ̂", "δ̂"):
        table.add_column(col, justify="right")
    for result in results:
        record = _sim_record(result, sim.seed)
        record.update(e_df_analytic=analytic.e_df, e_r_analytic=analytic.e_r, e_d_analytic=analytic.e_d)
        if paired is not None:
            record["paired_difference"] = paired.difference
        records.append(record)
        ci = "rare" if result.rare_event else f"{result.ci_halfwidth_df:.2e}"
        table.add_row(
            result.power_model.value,
            _fmt(result.eps_df_hat),
            ci,
            _fmt(analytic.e_df),
            f"{result.throughput_hat:.6f}",
            f"{result.delay_hat:.1f}",
        )
        if result.rare_event:
            console.print(f"[yellow]{result.power_model.value}：錯誤數 {result.errors} < {RARE_EVENT_ERRORS}，估計值不可靠[/yellow]")
    console.print(table)
    if paired is not None:
        console.print(f"[cyan]成對差值[/cyan] ε̂(approx) − ε̂(accumulated) = {paired.difference:.4e}")

    if out_dir is not None:
        out_dir = Path(out_dir)
        files = [write_table(records, out_dir / "simulate.csv")]
        if results[0].completed_runs:
            pmf = empirical_run_pmf(results[0])
            reference = run_pmf_reference(analytic.e_r, pmf.size - 1)
            run_rows = [
                {"L": L, "count": int(results[0].run_histogram[L]), "pmf": float(pmf[L]), "pmf_analytic": float(reference[L])}
                for L in range(pmf.size)
            ]
            files.append(write_table(run_rows, out_dir / "runs.csv"))
        _finish(out_dir, "simulate", config, files, {"blocks": sim.blocks, "model": model})
    return EXIT_OK


# ── figure ────────────────────────────────────────────────────────────


def _overlay(records: list[dict], config: ExperimentConfig, params_for) -> int:
    """
    在每個可行最佳點（ε0 >= OVERLAY_MIN_EPS0）附上累積能量模型的模擬值：
    eps_df_sim 與 ci_sim；其餘列為 NaN。回傳模擬的點數。
    """
    sim = config.simulation
    count = 0
    for record in records:
        record.update(eps_df_sim=math.nan, ci_sim=math.nan)
        if record.get("v_opt") is None or record["eps0"] < OVERLAY_MIN_EPS0:
            continue
        plan = BlockPlan(n=int(record["n_opt"]), v=int(record["v_opt"]), k=int(record["k"]))
        sim_config = SimConfig(
            blocks=sim.overlay_blocks,
            seed=sim.seed,
            power_model=PowerModel.ACCUMULATED,
            chunk_size=sim.chunk_size,
            workers=sim.workers,
        )
        result = simulate(plan, params_for(record), sim_config)
        record.update(eps_df_sim=result.eps_df_hat, ci_sim=result.ci_halfwidth_df)
        count += 1
    return count


def cmd_figure(figure_id: str, config: ExperimentConfig, out_dir: Path) -> int:
    """依預設格點重現各數值實驗，每條曲線一個 CSV；overlay 開啟時附上模擬值。"""
    config = apply_preset(config, figure_id)
    console.rule(f"figure {figure_id}")
    out_dir = Path(out_dir)
    params = config.system.to_params()
    quad = config.quadrature.to_config()
    grid = config.grid
    targets = config.targets
    workers = config.simulation.workers
    overlay = config.simulation.overlay and figure_id in OVERLAY_FIGURES
    if config.simulation.overlay and not overlay:
        logger.info(f"{figure_id} 沒有最佳點可疊加模擬值，略過 overlay")
    # 搜尋下界低於常態近似可靠範圍時提醒（fig5 的 n 由 total 決定）
    if figure_id != "fig5":
        _warn_small_n(grid.n_search_min if figure_id == "fig3" else grid.n_min)
    files: list[Path] = []
    overlay_points = 0

    def fixed(_record: dict) -> SystemParams:
        return params

    def moved(record: dict) -> SystemParams:
        return params.with_relay_position(record["d1"], grid.d_total)

    def emit(curve: list[dict], name: str, params_for=fixed) -> None:
        nonlocal overlay_points
        if overlay:
            overlay_points += _overlay(curve, config, params_for)
        files.append(write_table(curve, out_dir / name))

    if figure_id == "fig2":
        for k in grid.k_values:
            rows = blocklength_profile(k, targets.eps0, params, grid.n_grid, grid.v_grid, quad, workers)
            for eps0 in targets.eps0:
                curve = [row.as_record() for row in rows if row.coords["eps0"] == eps0]
                emit(curve, f"fig2_k{k}_eps{eps_tag(eps0)}.csv")
    elif figure_id == "fig3":
        for k in grid.k_values:
            rows = min_n_curve(grid.v_grid, k, targets.eps0, params, (grid.n_search_min, grid.n_search_max), quad)
            for eps0 in targets.eps0:
                curve = [row.as_record() for row in rows if row.coords["eps0"] == eps0]
                emit(curve, f"fig3_k{k}_eps{eps_tag(eps0)}.csv")
    elif figure_id == "fig4a":
        rows = min_delay_vs_k(
            grid.k_values, targets.eps0, params, grid.n_grid, grid.v_grid, quad, workers, targets.delay_budget
        )
        summary = []
        for eps0 in targets.eps0:
            curve = [row.as_record() for row in rows if row.coords["eps0"] == eps0]
            emit(curve, f"fig4a_eps{eps_tag(eps0)}.csv")
            k_max = max_k_under_budget(rows, eps0, targets.delay_budget)
            summary.append({"eps0": eps0, "delay_budget": targets.delay_budget, "max_k": k_max})
            console.print(f"[cyan]ε0={eps0:.0e}[/cyan] δ* ≤ {targets.delay_budget:g} 的最大 k = {k_max}")
        files.append(write_table(summary, out_dir / "fig4a_budget.csv"))
    elif figure_id == "fig4b":
        for k in grid.k_values:
            rows = relay_position_sweep(
                k, targets.eps0, params, grid.d_total, grid.d1_values, grid.n_grid, grid.v_grid, quad,
                workers=workers, delay_budget=targets.delay_budget,
            )
            for eps0 in targets.eps0:
                curve = [row.as_record() for row in rows if row.coords["eps0"] == eps0]
                emit(curve, f"fig4b_k{k}_eps{eps_tag(eps0)}.csv", params_for=moved)
    else:
        for k in grid.k_values:
            rows = fixed_budget_sweep(grid.total, k, params, grid.budget_v_grid, quad)
            best = best_row(rows)
            console.print(f"[cyan]k={k}[/cyan] 最小 E[ε_DF] = {best.breakdown.e_df:.4e} at v={best.coords['v']}")
            emit([row.as_record() for row in rows], f"fig5_k{k}.csv")

    if overlay:
        console.print(f"[cyan]模擬疊加[/cyan] {overlay_points} 個點，每點 {config.simulation.overlay_blocks} 個區塊")
    extra = {"figure": figure_id, "overlay": overlay, "overlay_points": overlay_points}
    _finish(out_dir, f"figure {figure_id}", config, files, extra)
    return EXIT_OK
