"""工具函数模块，提供日志配置、运行时设置和模板渲染等通用功能。

该模块在导入时加载 .env 文件，并通过 pydantic-settings 暴露以 ELLIPSAR_
为前缀的运行时设置。报告模板存放在 ellipsar/templates 目录，使用 Jinja2 渲染。
"""
import logging
import os
from functools import lru_cache
from typing import Any, Optional

from dotenv import load_dotenv
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# 加载 .env 文件
# 尝试在当前目录和上级目录寻找 .env
load_dotenv()
load_dotenv(os.path.join(os.path.dirname(__file__), '..', '.env'))

TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), 'templates')


class RuntimeSettings(BaseSettings):
    """进程级运行时设置，全部可通过环境变量覆盖。

    Attributes:
        log_level: 默认日志级别。
        log_file: 可选的日志文件路径。
        default_parallelism: 未显式指定时实验使用的进程数。
    """
    model_config = SettingsConfigDict(env_prefix="ELLIPSAR_", extra="ignore")

    log_level: str = Field(default="INFO", description="默认日志级别")
    log_file: Optional[str] = Field(default=None, description="日志文件路径")
    default_parallelism: int = Field(default=1, ge=1, description="默认并行进程数")


@lru_cache(maxsize=1)
def get_settings() -> RuntimeSettings:
    """读取并缓存运行时设置。"""
    return RuntimeSettings()


def setup_logger(name: Optional[str] = None, log_file: Optional[str] = None, level=None, console_output: bool = True, clear_existing: bool = False):
    """设置 Logger，支持输出到控制台（stderr）和文件。

    Args:
        name: Logger 名称，会自动挂在 "ellipsar" 命名空间下。
        log_file: 日志文件路径，默认取 ELLIPSAR_LOG_FILE。
        level: 日志级别，默认取 ELLIPSAR_LOG_LEVEL。
        console_output: 是否输出到控制台。
        clear_existing: 是否清除现有的 Handler。

    Returns:
        配置好的 Logger 对象。
    """
    settings = get_settings()
    full_name = f"ellipsar.{name}" if name else "ellipsar"
    logger = logging.getLogger(full_name)
    logger.setLevel(level if level is not None else settings.log_level.upper())
    # 交给 "ellipsar" 根 logger 之外的处理器时不重复输出
    logger.propagate = False

    if clear_existing:
        for handler in logger.handlers[:]:
            logger.removeHandler(handler)

    # 防止重复添加 Handler
    if not logger.handlers:
        formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

        # 控制台 Handler 写 stderr，标准输出留给 CSV
        if console_output:
            console_handler = logging.StreamHandler()
            console_handler.setFormatter(formatter)
            logger.addHandler(console_handler)

        log_file = log_file or settings.log_file
        if log_file:
            log_dir = os.path.dirname(log_file)
            if log_dir and not os.path.exists(log_dir):
                os.makedirs(log_dir)
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    return logger


def set_global_level(level: str) -> None:
    """把所有已创建的 ellipsar logger 切换到指定级别（CLI 的 --verbose 使用）。"""
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith("ellipsar") and isinstance(logger, logging.Logger):
            logger.setLevel(level)


@lru_cache(maxsize=1)
def _template_env() -> Environment:
    return Environment(
        loader=FileSystemLoader(TEMPLATE_DIR),
        undefined=StrictUndefined,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )


def render_template(template_name: str, **context: Any) -> str:
    """从 ellipsar/templates 目录加载模板并渲染。

    Args:
        template_name: 模板文件名（含扩展名）。
        **context: 模板变量。

    Returns:
        渲染后的文本。

    Raises:
        FileNotFoundError: 如果模板文件不存在。
    """
    template_path = os.path.join(TEMPLATE_DIR, template_name)
    if not os.path.exists(template_path):
        raise FileNotFoundError(f"Template file not found: {template_path}")
    return _template_env().get_template(template_name).render(**context)
