# 檔名：__init__.py
# 專案路徑：src/__init__.py
# 功能：套件版本；manifest 會記錄此版本以利重現。

__version__ = "0.1.0"
