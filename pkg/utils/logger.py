"""
日志模块
根 logger 为 circlecal，各模块通过 get_module_logger("cga") 之类拿到 circlecal.cga。
控制台输出走 stderr，stdout 只留给 CLI 的 JSON 结果。

环境变量（可写在 .env）:
    LOG_LEVEL     日志级别，默认 INFO
    LOG_CONSOLE   是否输出到控制台，默认 true
    LOG_FILE      是否写日志文件，默认 false
    LOG_DIR       日志目录，默认项目根目录下的 logs/
    LOG_DETAILED  格式中是否带文件名与行号，默认 false
"""

import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Dict, Optional

from dotenv import load_dotenv

load_dotenv()

DEFAULT_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
DETAILED_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(filename)s:%(lineno)d | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

DEFAULT_LOG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "logs")

ROOT_LOGGER_NAME = "circlecal"

_loggers: Dict[str, logging.Logger] = {}


def _flag(key: str, default: bool) -> bool:
    value = os.getenv(key)
    if value is None or value == "":
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


def _level(name: Optional[str]) -> int:
    return getattr(logging, (name or "INFO").upper(), logging.INFO)


def setup_logger(
    name: str = ROOT_LOGGER_NAME,
    level: int = logging.INFO,
    log_dir: Optional[str] = None,
    console_output: bool = True,
    file_output: bool = False,
    max_bytes: int = 5 * 1024 * 1024,
    backup_count: int = 3,
    detailed: bool = False,
) -> logging.Logger:
    """
    配置 logger；已有 handler 时直接返回，不重复添加

    Args:
        name: logger 名称
        level: 日志级别
        log_dir: 日志目录，file_output 为 True 时使用
        console_output: 是否输出到 stderr
        file_output: 是否写按大小轮转的日志文件
        max_bytes: 单个日志文件最大字节数
        backup_count: 保留的轮转文件数
        detailed: 是否使用带文件名与行号的格式

    Returns:
        logger 实例
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    logger.setLevel(level)
    logger.propagate = False
    formatter = logging.Formatter(DETAILED_FORMAT if detailed else DEFAULT_FORMAT, datefmt=DATE_FORMAT)

    if console_output:
        console = logging.StreamHandler(sys.stderr)
        console.setLevel(level)
        console.setFormatter(formatter)
        logger.addHandler(console)

    if file_output:
        target_dir = log_dir or DEFAULT_LOG_DIR
        os.makedirs(target_dir, exist_ok=True)
        # 文件里始终保留 DEBUG，便于事后排查 RANSAC / LM 的迭代细节
        file_handler = RotatingFileHandler(
            os.path.join(target_dir, f"{name}.log"),
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding="utf-8",
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
        logger.setLevel(logging.DEBUG)

    if not logger.handlers:
        logger.addHandler(logging.NullHandler())
    return logger


def get_logger(name: str = ROOT_LOGGER_NAME) -> logging.Logger:
    """
    获取 logger（按名称缓存）

    根 logger 按环境变量配置 handler；子 logger 不挂 handler，经 propagate 交给根 logger。
    """
    if name in _loggers:
        return _loggers[name]

    if name == ROOT_LOGGER_NAME:
        logger = setup_logger(
            name=name,
            level=_level(os.getenv("LOG_LEVEL")),
            log_dir=os.getenv("LOG_DIR") or DEFAULT_LOG_DIR,
            console_output=_flag("LOG_CONSOLE", True),
            file_output=_flag("LOG_FILE", False),
            detailed=_flag("LOG_DETAILED", False),
        )
    else:
        get_logger(ROOT_LOGGER_NAME)
        logger = logging.getLogger(name)
        logger.setLevel(logging.NOTSET)
        logger.propagate = True

    _loggers[name] = logger
    return logger


def get_module_logger(module_name: str) -> logging.Logger:
    """
    获取子模块 logger

    Args:
        module_name: 模块名，如 "cga"、"pnp"、"synth"

    Returns:
        circlecal.<module_name> logger
    """
    return get_logger(f"{ROOT_LOGGER_NAME}.{module_name}")


def set_level(level_name: str) -> None:
    """调整控制台输出级别（CLI 的 --log-level）；文件 handler 不受影响"""
    level = _level(level_name)
    root = get_logger(ROOT_LOGGER_NAME)
    has_file = False
    for handler in root.handlers:
        if isinstance(handler, RotatingFileHandler):
            has_file = True
        else:
            handler.setLevel(level)
    root.setLevel(min(level, logging.DEBUG) if has_file else level)
