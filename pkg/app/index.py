import logging
import sys

import click

from app.commands import benchmark, detect, evaluate, export_plot, simulate
from app.config import settings
from app.handlers import HandledGroup, register_exception_handlers

# 設定 logging（stdout 保留給 NDJSON / 表格輸出）
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"


def create_app() -> click.Group:
    """建立 rio-cpd 命令列應用程式"""

    @click.group(name="rio-cpd", cls=HandledGroup)
    @click.option("--debug", is_flag=True, default=settings.debug, help="輸出 DEBUG 等級的 log")
    @click.version_option(VERSION, prog_name=settings.app_name)
    def app(debug: bool):
        """RIO-CPD: SPD 流形上、考慮相關性的線上變化點偵測"""
        if debug:
            logging.getLogger().setLevel(logging.DEBUG)
        logger.debug(f"Starting {settings.app_name} (debug={debug})")

    # 註冊例外處理器
    register_exception_handlers(app.exception_handlers)

    # 註冊命令
    for command in (detect, simulate, evaluate, export_plot, benchmark):
        app.add_command(command)

    return app


app = create_app()
