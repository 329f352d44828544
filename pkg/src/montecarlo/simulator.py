# 檔名：simulator.py
# 專案路徑：src/montecarlo/simulator.py
# 功能：區塊層級 Monte Carlo 模擬 TSR DF 中繼鏈路（近似功率模型與能量累積模型）。
#
# 區塊序列切成固定大小的 chunk，每個 chunk 用 SeedSequence(seed, spawn_key=(index,))
# 產生獨立亂數流；能量緩衝不跨 chunk。結果只取決於 (seed, chunk_size)，
# 與 worker 數量無關。

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from loguru import logger
from scipy.special import gammaincinv

from src.common.errors import ContractError, SimulationError
from src.fbl.normal_approx import block_error
from src.model.link import (
    BlockPlan,
    SystemParams,
    harvest_gain,
    pmf_failure_run_constant,
    relay_power_approx,
    snr_dest,
    snr_relay,
)

MIN_CHUNK = 10_000
DEFAULT_CHUNK = 65_536
Z_95 = 1.959963984540054
# 期望錯誤數低於此值時，常態近似的信賴區間不可靠
RARE_EVENT_ERRORS = 30


class PowerModel(str, Enum):
    APPROX = "approx"
    ACCUMULATED = "accumulated"


@dataclass(frozen=True)
class SimConfig:
    """
    模擬設定。
    - blocks: 模擬區塊數（>= 1）
    - seed: 64-bit 種子
    - power_model: approx / accumulated
    - common_random_numbers: 以共用的 uniform 亂數流驅動衰落與兩次 Bernoulli 判定
    - chunk_size: 每個 chunk 的區塊數（>= 1e4）
    - workers: 平行 process 數；1 表示在本行程內依序執行
    """

    blocks: int
    seed: int = 0
    power_model: PowerModel = PowerModel.APPROX
    common_random_numbers: bool = False
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.blocks, int) or isinstance(self.blocks, bool) or self.blocks < 1:
            raise ContractError(f"blocks 必須為正整數，實得 {self.blocks!r}")
        if not 0 <= self.seed < 2**64:
            raise ContractError(f"seed 必須介於 [0, 2^64)，實得 {self.seed}")
        if self.chunk_size < MIN_CHUNK:
            raise ContractError(f"chunk_size 必須 >= {MIN_CHUNK}，實得 {self.chunk_size}")
        if self.workers < 1:
            raise ContractError(f"workers 必須 >= 1，實得 {self.workers}")
        object.__setattr__(self, "power_model", PowerModel(self.power_model))


@dataclass
class _Tally:
    blocks: int = 0
    errors: int = 0
    relay_failures: int = 0
    dest_failures: int = 0
    run_histogram: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def merge(self, other: "_Tally") -> "_Tally":
        size = max(self.run_histogram.size, other.run_histogram.size)
        hist = np.zeros(size, dtype=np.int64)
        hist[: self.run_histogram.size] += self.run_histogram
        hist[: other.run_histogram.size] += other.run_histogram
        return _Tally(
            blocks=self.blocks + other.blocks,
            errors=self.errors + other.errors,
            relay_failures=self.relay_failures + other.relay_failures,
            dest_failures=self.dest_failures + other.dest_failures,
            run_histogram=hist,
        )


@dataclass(frozen=True)
class SimResult:
    """
    模擬結果。eps_d_hat 為「中繼解碼成功」條件下的目的端失敗率；
    中繼從未成功時為 NaN。run_histogram[L] 為已完成的連續失敗長度 L 的次數。
    """

    plan: BlockPlan
    power_model: PowerModel
    blocks: int
    errors: int
    relay_failures: int
    dest_failures: int
    eps_df_hat: float
    eps_r_hat: float
    eps_d_hat: float
    throughput_hat: float
    delay_hat: float
    ci_halfwidth_df: float
    run_histogram: np.ndarray

    @property
    def completed_runs(self) -> int:
        return int(self.run_histogram.sum())

    @property
    def rare_event(self) -> bool:
        return self.errors < RARE_EVENT_ERRORS


@dataclass(frozen=True)
class PairedSimResult:
    approx: SimResult
    accumulated: SimResult
    approx_only_successes: int

    @property
    def difference(self) -> float:
        """ε̂(approx) - ε̂(accumulated)；依成對順序性必為 >= 0。"""
        return self.approx.eps_df_hat - self.accumulated.eps_df_hat

    @property
    def relative_difference(self) -> float:
        if self.approx.eps_df_hat == 0:
            return 0.0
        return self.difference / self.approx.eps_df_hat


def sample_gains(rng: np.random.Generator, size: int, m: float, common_random_numbers: bool = False):
    """
    產生 (h, g, u_r, u_d)：h、g ~ Gamma(m, 1/m)，u_r、u_d ~ U[0,1)。

    common_random_numbers 為 True 時 h、g 由 uniform 經 Gamma 反 CDF 轉換，
    四條亂數流的對應關係固定；否則用 Generator.gamma（對任意實數 m 皆精確）。
    """
    if common_random_numbers:
        u = rng.random((4, size))
        return gammaincinv(m, u[0]) / m, gammaincinv(m, u[1]) / m, u[2], u[3]
    h = rng.gamma(m, 1.0 / m, size)
    g = rng.gamma(m, 1.0 / m, size)
    return h, g, rng.random(size), rng.random(size)


def _buffered_gain(h: np.ndarray, relay_ok: np.ndarray) -> np.ndarray:
    """
    每個區塊所屬「自上次中繼發射後」區段的 h 總和。
    區段編號 = 該區塊之前的成功次數；中繼成功的區塊是其區段的最後一個。
    """
    seg = np.cumsum(relay_ok) - relay_ok.astype(np.int64)
    return np.bincount(seg, weights=h)[seg]


def _run_histogram(relay_ok: np.ndarray) -> np.ndarray:
    # 只統計以中繼成功結尾的區段；chunk 尾端未完成的區段不計
    seg = np.cumsum(relay_ok) - relay_ok.astype(np.int64)
    lengths = np.bincount(seg)[seg[relay_ok]] - 1
    return np.bincount(lengths).astype(np.int64)


def _require_finite(name: str, values: np.ndarray, chunk_index: int) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise SimulationError(f"chunk {chunk_index} 第 {bad} 個區塊的 {name} 非有限值")


def _simulate_chunk(task: tuple) -> tuple[dict, int]:
    plan, params, seed, chunk_index, size, models, crn = task
    # 每個 chunk 一條獨立亂數流，只由 (seed, chunk_index) 決定
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))
    h, g, u_r, u_d = sample_gains(rng, size, params.m, crn)
    r = plan.rate

    # 第一段：中繼解碼（Bernoulli 判定 u_r >= ε_r）
    eps_r = block_error(snr_relay(h, params), r, plan.n)
    _require_finite("ε_r", eps_r, chunk_index)
    relay_ok = u_r >= eps_r
    hist = _run_histogram(relay_ok)

    tallies = {}
    successes = {}
    for model in models:
        # 中繼功率：近似模型只用本區塊的 h，累積模型用整段緩衝
        if model is PowerModel.APPROX:
            power = relay_power_approx(h, plan, params)
        else:
            power = harvest_gain(plan, params) * _buffered_gain(h, relay_ok)
        # 第二段：目的端解碼，兩個模型共用同一個 u_d
        eps_d = block_error(snr_dest(h, g, plan, params, relay_power=power), r, plan.n)
        _require_finite("ε_d", eps_d, chunk_index)
        ok = relay_ok & (u_d >= eps_d)
        successes[model] = ok
        n_relay_ok = int(relay_ok.sum())
        n_ok = int(ok.sum())
        tallies[model] = _Tally(
            blocks=size,
            errors=size - n_ok,
            relay_failures=size - n_relay_ok,
            dest_failures=n_relay_ok - n_ok,
            run_histogram=hist,
        )

    # 成對比較：只在近似模型成功的區塊數（正確時為 0）
    approx_only = 0
    if len(models) == 2:
        approx_only = int(np.sum(successes[PowerModel.APPROX] & ~successes[PowerModel.ACCUMULATED]))
    return tallies, approx_only


def _chunk_sizes(blocks: int, chunk_size: int) -> list[int]:
    full, rest = divmod(blocks, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _run(plan: BlockPlan, params: SystemParams, config: SimConfig, models: tuple) -> tuple[dict, int]:
    crn = config.common_random_numbers or len(models) == 2
    tasks = [
        (plan, params, config.seed, i, size, models, crn)
        for i, size in enumerate(_chunk_sizes(config.blocks, config.chunk_size))
    ]
    logger.debug(f"simulate n={plan.n} v={plan.v} k={plan.k} blocks={config.blocks} chunks={len(tasks)}")
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(_simulate_chunk, tasks))
    else:
        outputs = [_simulate_chunk(t) for t in tasks]

    # 依 chunk 順序合併
    merged = {model: _Tally() for model in models}
    approx_only = 0
    for tallies, extra in outputs:
        for model in models:
            merged[model] = merged[model].merge(tallies[model])
        approx_only += extra
    return merged, approx_only


def _to_result(plan: BlockPlan, model: PowerModel, t: _Tally) -> SimResult:
    eps = t.errors / t.blocks
    relay_ok = t.blocks - t.relay_failures
    eps_d = t.dest_failures / relay_ok if relay_ok else math.nan
    return SimResult(
        plan=plan,
        power_model=model,
        blocks=t.blocks,
        errors=t.errors,
        relay_failures=t.relay_failures,
        dest_failures=t.dest_failures,
        eps_df_hat=eps,
        eps_r_hat=t.relay_failures / t.blocks,
        eps_d_hat=eps_d,
        throughput_hat=(1.0 - eps) * plan.k / plan.total,
        delay_hat=plan.total / (1.0 - eps) if eps < 1.0 else math.inf,
        ci_halfwidth_df=Z_95 * math.sqrt(eps * (1.0 - eps) / t.blocks),
        run_histogram=t.run_histogram,
    )


def simulate(plan: BlockPlan, params: SystemParams, config: SimConfig) -> SimResult:
    """依 config.power_model 模擬一個操作點。"""
    merged, _ = _run(plan, params, config, (config.power_model,))
    result = _to_result(plan, config.power_model, merged[config.power_model])
    if result.rare_event:
        logger.warning(f"錯誤數只有 {result.errors}（< {RARE_EVENT_ERRORS}），信賴區間不可靠")
    return result


def compare_power_models(plan: BlockPlan, params: SystemParams, config: SimConfig) -> PairedSimResult:
    """
    在共用亂數下同時跑兩種功率模型。
    累積模型的中繼功率逐區塊 >= 近似模型，所以近似模型的成功集合必為其子集；
    若不成立代表實作錯誤，直接丟 SimulationError。
    """
    models = (PowerModel.APPROX, PowerModel.ACCUMULATED)
    merged, approx_only = _run(plan, params, config, models)
    if approx_only:
        raise SimulationError(f"成對比較順序性被破壞：{approx_only} 個區塊只在近似模型成功")
    return PairedSimResult(
        approx=_to_result(plan, PowerModel.APPROX, merged[PowerModel.APPROX]),
        accumulated=_to_result(plan, PowerModel.ACCUMULATED, merged[PowerModel.ACCUMULATED]),
        approx_only_successes=approx_only,
    )


def empirical_run_pmf(result: SimResult) -> np.ndarray:
    """run_histogram 正規化成機率；沒有任何已完成的區段時丟 ContractError。"""
    total = result.run_histogram.sum()
    if total == 0:
        raise ContractError("run_histogram 為空：沒有任何完成的中繼失敗區段")
    return result.run_histogram / total


def run_pmf_reference(eps_r: float, z_max: int) -> np.ndarray:
    """常數 ε_r 下的幾何 PMF，L = 0..z_max，供與 empirical_run_pmf 逐格比較。"""
    return np.array([pmf_failure_run_constant(z, eps_r) for z in range(z_max + 1)])
