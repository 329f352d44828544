# 檔名：config.py
# 專案路徑：src/cli/config.py
# 功能：實驗設定檔（key = value + [section]）的讀取、驗證與還原成文字。
#
# 格式：
#   # 註解
#   [system]
#   omega = 2.7
#   [targets]
#   eps0 = 1e-3, 1e-5
# 每個值記住自己的行號，pydantic 驗證失敗時以「路徑:行號: 訊息」回報。
# 副檔名為 .yaml/.yml 時視為 manifest，讀其中的 config_text 重跑。

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from src.analysis.error_model import QuadratureConfig
from src.common.errors import ConfigError, ContractError
from src.model.link import BlockPlan, SystemParams
from src.reporting.tables import read_manifest


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemSection(_Section):
    ps: float = 1.0
    eta: float = 0.5
    omega: float = 2.7
    d1: float = 1.0
    d2: float = 1.0
    sigma2_r: float = 0.01
    sigma2_d: float = 0.01
    m: float = 2.0
    tc: float = 2e-6

    def to_params(self) -> SystemParams:
        return SystemParams(**self.model_dump())


class PlanSection(_Section):
    n: Optional[int] = None
    v: Optional[int] = None
    k: Optional[int] = None

    def to_plan(self) -> BlockPlan:
        missing = [name for name in ("n", "v", "k") if getattr(self, name) is None]
        if missing:
            raise ConfigError(f"[plan] 缺少 {', '.join(missing)}")
        return BlockPlan(n=self.n, v=self.v, k=self.k)


class GridSection(_Section):
    n_min: int = 100
    n_max: int = 2000
    n_step: int = 25
    v_min: int = 0
    v_max: int = 10000
    v_step: int = 50
    k_values: list[int] = [160]
    total: int = 2000
    d_total: float = 2.0
    d1_values: list[float] = [round(0.1 + 0.05 * i, 2) for i in range(37)]
    n_search_min: int = 100
    n_search_max: int = 3000

    @field_validator("k_values", "d1_values", mode="before")
    @classmethod
    def split_items(cls, value):
        return _split_list(value)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.n_step < 1 or self.v_step < 1:
            raise ValueError("n_step、v_step 必須 >= 1")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("必須滿足 1 <= n_min <= n_max")
        if not 0 <= self.v_min <= self.v_max:
            raise ValueError("必須滿足 0 <= v_min <= v_max")
        if not 1 <= self.n_search_min <= self.n_search_max:
            raise ValueError("必須滿足 1 <= n_search_min <= n_search_max")
        if not self.k_values:
            raise ValueError("k_values 不可為空")
        return self

    @property
    def n_grid(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1, self.n_step))

    @property
    def v_grid(self) -> list[int]:
        return list(range(self.v_min, self.v_max + 1, self.v_step))

    @property
    def budget_v_grid(self) -> list[int]:
        """固定 2n+v = total 時可用的 v：< total 且 total - v 為偶數。"""
        return [v for v in self.v_grid if v < self.total and (self.total - v) % 2 == 0]


class TargetsSection(_Section):
    eps0: list[float] = [1e-5]
    delay_budget: float = 2000.0

    @field_validator("eps0", mode="before")
    @classmethod
    def split_items(cls, value):
        return _split_list(value)

    @field_validator("eps0")
    @classmethod
    def _check_eps0(cls, values):
        if not values:
            raise ValueError("eps0 不可為空")
        if any(not 0 < e <= 1 for e in values):
            raise ValueError("eps0 每個值都必須介於 (0, 1]")
        return values


class SimulationSection(_Section):
    blocks: int = 1_000_000
    seed: int = 0
    model: Literal["approx", "accumulated", "both"] = "approx"
    chunk_size: int = 65_536
    workers: int = 1
    # figure 的模擬疊加點（累積能量模型），每點 overlay_blocks 個區塊
    overlay: bool = False
    overlay_blocks: int = 100_000

    @field_validator("overlay_blocks")
    @classmethod
    def _check_overlay_blocks(cls, value):
        if value < 1:
            raise ValueError("overlay_blocks 必須 >= 1")
        return value


class QuadratureSection(_Section):
    nodes: int = 96
    scheme: Literal["lattice", "laguerre"] = "lattice"

    def to_config(self) -> QuadratureConfig:
        return QuadratureConfig(nodes=self.nodes, scheme=self.scheme)


class OutputSection(_Section):
    dir: str = "out"


SECTIONS = {
    "system": SystemSection,
    "plan": PlanSection,
    "grid": GridSection,
    "targets": TargetsSection,
    "simulation": SimulationSection,
    "quadrature": QuadratureSection,
    "output": OutputSection,
}


class ExperimentConfig(_Section):
    system: SystemSection = SystemSection()
    plan: PlanSection = PlanSection()
    grid: GridSection = GridSection()
    targets: TargetsSection = TargetsSection()
    simulation: SimulationSection = SimulationSection()
    quadrature: QuadratureSection = QuadratureSection()
    output: OutputSection = OutputSection()

    def with_values(self, section: str, only_unset: bool = False, **values) -> "ExperimentConfig":
        """
        回傳替換某個 section 欄位後的新設定（會重新驗證）。
        only_unset=True 時，設定檔裡明確寫過的欄位保留原值。
        """
        current = getattr(self, section)
        if only_unset:
            values = {k: v for k, v in values.items() if k not in current.model_fields_set}
        if not values:
            return self
        data = current.model_dump(exclude_unset=True)
        data.update(values)
        try:
            updated = SECTIONS[section](**data)
        except ValidationError as exc:
            err = exc.errors()[0]
            raise ConfigError(f"[{section}] {'.'.join(map(str, err['loc']))}: {err['msg']}") from exc
        return self.model_copy(update={section: updated})


@dataclass(frozen=True)
class LoadedConfig:
    config: ExperimentConfig
    source: str


def _parse_lines(text: str, source: str) -> dict[str, dict[str, tuple[str, int]]]:
    raw: dict[str, dict[str, tuple[str, int]]] = {}
    section: Optional[str] = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"未知的 section [{section}]，可用：{', '.join(SECTIONS)}", source, lineno)
            raw.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"無法解析：{stripped!r}（應為 key = value）", source, lineno)
        if section is None:
            raise ConfigError("key = value 必須位於某個 [section] 之下", source, lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError("缺少 key", source, lineno)
        if key in raw[section]:
            raise ConfigError(f"[{section}] {key} 重複定義（第一次在第 {raw[section][key][1]} 行）", source, lineno)
        raw[section][key] = (value, lineno)
    return raw


def parse_config_text(text: str, source: str = "<text>") -> ExperimentConfig:
    """解析設定文字；任何錯誤都帶著來源與行號丟出 ConfigError。"""
    raw = _parse_lines(text, source)
    sections = {}
    for name, entries in raw.items():
        try:
            sections[name] = SECTIONS[name](**{key: value for key, (value, _) in entries.items()})
        except ValidationError as exc:
            err = exc.errors()[0]
            field = str(err["loc"][0]) if err["loc"] else ""
            line = entries[field][1] if field in entries else next(iter(entries.values()))[1]
            raise ConfigError(f"[{name}] {field}: {err['msg']}", source, line) from exc
    config = ExperimentConfig(**sections)
    _check_domain(config, source)
    return config


def _check_domain(config: ExperimentConfig, source: str) -> None:
    # 交給領域型別再驗證一次（例如 eta 必須在 (0,1)）
    try:
        config.system.to_params()
        config.quadrature.to_config()
    except ContractError as exc:
        raise ConfigError(str(exc), source) from exc


def load_config(path: Optional[Path]) -> LoadedConfig:
    """讀設定檔；path 為 None 時回傳全預設值。"""
    if path is None:
        return LoadedConfig(ExperimentConfig(), "<defaults>")
    path = Path(path)
    if not path.is_file():
        raise ConfigError("找不到設定檔", str(path))
    if path.suffix.lower() in (".yaml", ".yml"):
        text = read_manifest(path)["config_text"]
        source = f"{path}#config_text"
    else:
        text = path.read_text(encoding="utf-8")
        source = str(path)
    return LoadedConfig(parse_config_text(text, source), source)


def _format_value(value) -> str:
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(config: ExperimentConfig) -> str:
    """把完整（含預設值）設定還原成文字；再 parse 一次會得到相同設定。"""
    lines = []
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for key, value in section.model_dump().items():
            if value is None:
                continue
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
