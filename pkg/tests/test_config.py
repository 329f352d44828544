# 路徑：tests/test_config.py
# 功能：實驗設定檔解析、行號錯誤訊息、還原成文字與 manifest 重跑

from pathlib import Path

import pytest

from src.cli.config import ExperimentConfig, load_config, parse_config_text, render_config
from src.common.errors import ConfigError
from src.reporting.tables import read_manifest, write_manifest

SAMPLE = """\
# 基準設定
[system]
omega = 3.0
d1 = 0.6   # 中繼位置

[plan]
n = 500
v = 1000
k = 160

[grid]
k_values = 64, 160
n_min = 200
n_max = 400
n_step = 100

[targets]
eps0 = 1e-3, 1e-5

[simulation]
workers = 3
model = both
"""


def test_parse_sample():
    config = parse_config_text(SAMPLE)
    assert config.system.omega == 3.0 and config.system.d1 == 0.6
    assert config.plan.to_plan().total == 2000
    assert config.grid.k_values == [64, 160]
    assert config.grid.n_grid == [200, 300, 400]
    assert config.targets.eps0 == [1e-3, 1e-5]
    assert config.simulation.model == "both"
    # 未寫到的 section 與欄位取預設值
    assert config.quadrature.nodes == 96
    assert config.system.to_params().eta == 0.5


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[system]\nomega = 2.7\n[bogus]\n", 3, "bogus"),
        ("[plan]\nn = 10\nn = 20\n", 3, "重複"),
        ("[plan]\nn 10\n", 2, "key = value"),
        ("n = 10\n", 1, "section"),
        ("[system]\neta = 0.5\nomega = abc\n", 3, "omega"),
        ("[grid]\nfoo = 1\n", 2, "foo"),
        ("[simulation]\nmodel = exact\n", 2, "model"),
    ],
)
def test_errors_carry_source_and_line(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, "exp.ini")
    assert info.value.line == line
    assert str(info.value).startswith(f"exp.ini:{line}: ")
    assert fragment in str(info.value)


def test_domain_errors_are_config_errors():
    with pytest.raises(ConfigError, match="eta"):
        parse_config_text("[system]\neta = 1.5\n", "exp.ini")
    with pytest.raises(ConfigError):
        parse_config_text("[grid]\nn_min = 500\nn_max = 100\n")
    with pytest.raises(ConfigError):
        parse_config_text("[targets]\neps0 = 0\n")


def test_missing_plan_fields():
    config = parse_config_text("[plan]\nn = 100\n")
    with pytest.raises(ConfigError, match="v, k"):
        config.plan.to_plan()


def test_render_round_trip():
    config = parse_config_text(SAMPLE)
    again = parse_config_text(render_config(config))
    assert again.model_dump() == config.model_dump()
    defaults = ExperimentConfig()
    assert parse_config_text(render_config(defaults)).model_dump() == defaults.model_dump()


def test_with_values_respects_explicit_fields():
    config = parse_config_text(SAMPLE)
    kept = config.with_values("simulation", only_unset=True, workers=8, seed=5)
    assert kept.simulation.workers == 3 and kept.simulation.seed == 5
    forced = config.with_values("simulation", workers=8)
    assert forced.simulation.workers == 8
    assert config.simulation.workers == 3
    with pytest.raises(ConfigError, match="scheme"):
        config.with_values("quadrature", scheme="simpson")


def test_budget_grid_excludes_total():
    config = parse_config_text("[grid]\nv_min = 1800\nv_max = 2100\nv_step = 100\ntotal = 2000\n")
    assert config.grid.budget_v_grid == [1800, 1900]
    odd_step = parse_config_text("[grid]\nv_min = 1990\nv_max = 2000\nv_step = 5\ntotal = 2000\n")
    assert odd_step.grid.budget_v_grid == [1990]


def test_load_config_paths(tmp_path: Path):
    assert load_config(None).source == "<defaults>"
    with pytest.raises(ConfigError, match="找不到"):
        load_config(tmp_path / "missing.ini")
    path = tmp_path / "exp.ini"
    path.write_text(SAMPLE, encoding="utf-8")
    loaded = load_config(path)
    assert loaded.source == str(path)
    assert loaded.config.grid.k_values == [64, 160]


def test_manifest_replay(tmp_path: Path):
    config = parse_config_text(SAMPLE)
    manifest = write_manifest(tmp_path, "eval", render_config(config), [tmp_path / "eval.csv"], {"seed": 0})
    payload = read_manifest(manifest)
    assert payload["command"] == "eval"
    assert payload["files"] == ["eval.csv"]
    replay = load_config(manifest)
    assert replay.source.endswith("#config_text")
    assert replay.config.model_dump() == config.model_dump()


def test_manifest_without_config_text(tmp_path: Path):
    path = tmp_path / "manifest.yaml"
    path.write_text("tool: wpt-relay-engine\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="config_text"):
        load_config(path)
