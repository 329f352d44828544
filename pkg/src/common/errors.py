# 檔名：errors.py
# 專案路徑：src/common/errors.py
# 功能：例外階層與 CLI 結束碼對照。

from typing import Optional

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


class WptRelayError(Exception):
    """所有本專案例外的基底類別；exit_code 供 CLI 對應結束碼。"""

    exit_code = EXIT_UNEXPECTED


class ContractError(WptRelayError, ValueError):
    """前置條件不成立（空序列、機率超出 [0,1]、不合法的區塊配置等）。"""

    exit_code = EXIT_CONFIG


class ConfigError(WptRelayError):
    """設定檔錯誤；帶有來源路徑與行號。"""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(prefix + message)


class IntegrationError(WptRelayError):
    """數值積分時被積函數出現非有限值。"""

    exit_code = EXIT_NUMERICAL


class SimulationError(WptRelayError):
    """模擬中間值非有限，或成對比較的順序性被破壞。"""

    exit_code = EXIT_NUMERICAL


class InfiniteDelayError(WptRelayError):
    """E[ε_DF] = 1 時延遲為無限大。"""

    exit_code = EXIT_NUMERICAL


class InfeasibleError(WptRelayError):
    """搜尋範圍內沒有任何點滿足目標錯誤率 ε0。"""

    exit_code = EXIT_INFEASIBLE
