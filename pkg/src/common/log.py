# 檔名：log.py
# 專案路徑：src/common/log.py
# 功能：loguru 輸出設定；CLI 與健康檢查共用。

import sys

from loguru import logger

from src.common.env_loader import get_env

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | <cyan>{name}</cyan> - {message}"


def configure_logging(verbose: bool = False) -> None:
    """
    重設 loguru sink 到 stderr。
    - verbose=True 時固定 DEBUG；否則讀 WPT_LOG_LEVEL（預設 INFO）。
    """
    level = "DEBUG" if verbose else get_env("WPT_LOG_LEVEL").strip().upper()
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
