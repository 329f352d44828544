# 路徑：src/common/env_loader.py
# 用途：讀取 .env 內的執行參數（WPT_* 系列）；提供 get_env/get_env_int 等工具。
# 約定：.env 放在專案根目錄（例如：WPT-Relay-Engine/.env），且沒有任何參數是必要的。
#
# 設計說明：
# - 透過 _resolve_project_root() 由檔案位置往上回推專案根目錄，不依賴「目前工作目錄」。
# - override=False（預設）以尊重既有系統環境變數；CLI 旗標再覆蓋這裡讀到的值。

import os
from typing import Dict, Optional

from dotenv import dotenv_values


def _resolve_project_root() -> str:
    """
    推導專案根目錄：本檔位於 .../src/common/env_loader.py，往上三層即為根目錄。
    """
    here = os.path.abspath(__file__)
    src_dir = os.path.dirname(os.path.dirname(here))
    return os.path.dirname(src_dir)


PROJECT_ROOT = _resolve_project_root()

# .env 搜尋順序（由高到低）：專案根目錄、目前工作目錄
DEFAULT_ENV_PATHS = [
    os.path.join(PROJECT_ROOT, ".env"),
    os.path.join(os.getcwd(), ".env"),
]

# 本專案認得的環境變數與預設值
ENV_DEFAULTS: Dict[str, str] = {
    "WPT_WORKERS": "1",
    "WPT_LOG_LEVEL": "INFO",
    "WPT_OUT_DIR": "out",
}


def load_env(env_path: Optional[str] = None, override: bool = False) -> Dict[str, str]:
    """
    載入 .env 中的變數進入 os.environ，並回傳「實際寫入」的鍵值字典。

    參數：
    - env_path: 指定 .env 完整路徑；None 則依序嘗試 DEFAULT_ENV_PATHS。
    - override: True 會覆蓋 os.environ 既有同名變數。

    回傳：
    - Dict[str, str]：這次實際寫入的鍵值；找不到 .env 時回傳空字典，不拋例外。
    """
    loaded: Dict[str, str] = {}
    path = env_path
    if path is None:
        path = next((p for p in DEFAULT_ENV_PATHS if os.path.isfile(p)), None)
    if not path or not os.path.isfile(path):
        return loaded

    for k, v in dotenv_values(path).items():
        if v is None:
            continue
        if override or k not in os.environ:
            os.environ[k] = v
            loaded[k] = v
    return loaded


def get_env(key: str, default: Optional[str] = None) -> str:
    """讀取單一環境變數；未設定時依序退回 default、ENV_DEFAULTS。"""
    fallback = default if default is not None else ENV_DEFAULTS.get(key)
    val = os.getenv(key, fallback)
    if val is None:
        raise KeyError(f"缺少環境變數且無預設值: {key}")
    return val


def get_env_int(key: str, default: int, minimum: int = 1) -> int:
    # 整數型設定；格式錯誤或小於下限時退回預設，不拋例外
    raw = (get_env(key, str(default)) or "").strip()
    try:
        v = int(raw)
    except ValueError:
        return default
    return v if v >= minimum else default
