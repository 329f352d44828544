# 檔名：tables.py
# 專案路徑：src/reporting/tables.py
# 功能：輸出 CSV 表格與 YAML manifest。
#
# 格式固定（科學記號 12 位有效小數、LF 換行、不含時間戳），
# 同一組輸入重跑會得到逐位元相同的檔案。

from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import pandas as pd
import yaml
from loguru import logger

from src import __version__
from src.common.errors import ConfigError

FLOAT_FORMAT = "%.12e"
MANIFEST_NAME = "manifest.yaml"


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def records_to_frame(records: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    """
    將 dict 列表轉成 DataFrame；整數欄位（可含 None）轉成 nullable Int64，
    避免被當成浮點數以科學記號輸出。
    """
    frame = pd.DataFrame(list(records))
    for column in frame.columns:
        values = [v for v in frame[column].tolist() if v is not None and not (isinstance(v, float) and v != v)]
        if values and all(_is_int(v) for v in values):
            frame[column] = pd.array([v if _is_int(v) else None for v in frame[column].tolist()], dtype="Int64")
    return frame


def write_table(records: Sequence[Mapping[str, Any]], path: Path) -> Path:
    """寫出一張 CSV（含標題列）；回傳寫入的路徑。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = records_to_frame(records)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
    logger.debug(f"wrote {len(frame)} rows -> {path}")
    return path


def write_manifest(
    out_dir: Path,
    command: str,
    config_text: str,
    files: Iterable[Path],
    extra: Mapping[str, Any] | None = None,
) -> Path:
    """
    寫出 manifest.yaml：工具版本、指令、完整設定文字、輸出檔清單與額外欄位（格點、種子等）。
    設定文字原樣嵌入，`--config manifest.yaml` 即可重跑。
    """
    out_dir = Path(out_dir)
    payload = {
        "tool": "wpt-relay-engine",
        "version": __version__,
        "command": command,
        **dict(extra or {}),
        "files": sorted(Path(f).name for f in files),
        "config_text": config_text,
    }
    path = out_dir / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(payload, f, sort_keys=False, allow_unicode=True, default_flow_style=False)
    return path


def read_manifest(path: Path) -> dict:
    """讀回 manifest；缺少 config_text 時丟 ConfigError。"""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            payload = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"manifest 無法解析：{exc}", path=str(path)) from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("config_text"), str):
        raise ConfigError("manifest 缺少 config_text 欄位", path=str(path))
    return payload
