# 檔名：main.py
# 專案路徑：src/cli/main.py
# 功能：命令列入口。
#
# 用法：
# - python -m src.cli.main eval --config exp.ini
# - python -m src.cli.main sweep budget --config exp.ini --out out/budget
# - python -m src.cli.main optimize --nodes 128 --workers 4
# - python -m src.cli.main simulate --blocks 1000000 --seed 7 --model both
# - python -m src.cli.main figure fig5 --out out/fig5
# - python -m src.cli.main figure fig5 --config out/fig5/manifest.yaml   （重跑）
#
# 結束碼：0 成功、2 設定錯誤、3 最佳化不可行、4 數值失敗、1 其他。

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger

from src import __version__
from src.cli.commands import FIGURES, SWEEPS, cmd_eval, cmd_figure, cmd_optimize, cmd_simulate, cmd_sweep, console
from src.cli.config import ExperimentConfig, load_config
from src.common.env_loader import get_env, get_env_int, load_env
from src.common.errors import EXIT_UNEXPECTED, WptRelayError
from src.common.log import configure_logging


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="設定檔（key = value）或 manifest.yaml")
    common.add_argument("--out", type=Path, default=None, help="輸出目錄（預設：設定檔 [output] dir 或 WPT_OUT_DIR）")
    common.add_argument("--seed", type=int, default=None, help="模擬種子（64-bit）")
    common.add_argument("--nodes", type=int, default=None, help="積分節點數")
    common.add_argument("--blocks", type=int, default=None, help="模擬區塊數")
    common.add_argument("--model", choices=["approx", "accumulated", "both"], default=None, help="中繼功率模型")
    common.add_argument("--workers", type=int, default=None, help="平行數（預設 WPT_WORKERS）")
    common.add_argument("--verbose", action="store_true", help="輸出 DEBUG 紀錄")

    parser = argparse.ArgumentParser(prog="wpt-relay", description="WPT DF 中繼短封包效能分析工具")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="單點錯誤率、吞吐量、延遲")
    sweep = sub.add_parser("sweep", parents=[common], help="固定區塊長度或中繼位置掃描")
    sweep.add_argument("kind", choices=SWEEPS)
    sub.add_parser("optimize", parents=[common], help="受限最佳化 (n*, v*)")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo 模擬")
    figure = sub.add_parser("figure", parents=[common], help="重現數值實驗的資料檔")
    figure.add_argument("figure_id", choices=FIGURES)
    figure.add_argument("--overlay", action="store_true", help="在 ε0 >= 1e-3 的最佳點附上 Monte Carlo 模擬值（累積能量模型）")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """設定檔 → 環境變數（只補設定檔未寫的欄位）→ CLI 旗標，後者優先。"""
    config = load_config(args.config).config
    config = config.with_values("simulation", only_unset=True, workers=get_env_int("WPT_WORKERS", 1))
    config = config.with_values("output", only_unset=True, dir=get_env("WPT_OUT_DIR"))

    simulation = {
        key: value
        for key, value in (("seed", args.seed), ("blocks", args.blocks), ("model", args.model), ("workers", args.workers))
        if value is not None
    }
    config = config.with_values("simulation", **simulation)
    if getattr(args, "overlay", False):
        config = config.with_values("simulation", overlay=True)
    if args.nodes is not None:
        config = config.with_values("quadrature", nodes=args.nodes)
    if args.out is not None:
        config = config.with_values("output", dir=str(args.out))
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    load_env()
    configure_logging(args.verbose)

    try:
        config = resolve_config(args)
        out_dir = Path(config.output.dir)
        if args.command == "eval":
            return cmd_eval(config, out_dir if args.out is not None else None)
        if args.command == "sweep":
            return cmd_sweep(config, out_dir, args.kind)
        if args.command == "optimize":
            return cmd_optimize(config, out_dir)
        if args.command == "simulate":
            return cmd_simulate(config, out_dir)
        return cmd_figure(args.figure_id, config, out_dir)
    except WptRelayError as exc:
        console.print(f"[red]{type(exc).__name__}[/red]: {exc}")
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        logger.exception("未預期的錯誤")
        console.print(f"[red]未預期的錯誤[/red]: {exc}")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
