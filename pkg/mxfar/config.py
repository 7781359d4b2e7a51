"""
Runtime settings and logging for the mxfar toolkit

Settings come from environment variables with the ``MXFAR_`` prefix (a
``.env`` file is loaded by the command-line entry point before the first
call to ``get_settings``).
"""
import os
import logging
from functools import lru_cache
from typing import Optional

from colorama import Fore, Style
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

__version__ = "0.3.0"

logger = logging.getLogger(__name__)

_LEVEL_COLORS = {
    logging.DEBUG: Fore.BLUE,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED,
}


class Settings(BaseSettings):
    """Environment-driven defaults shared by every subcommand"""
    model_config = SettingsConfigDict(env_prefix="MXFAR_", extra="ignore")

    log: str = Field(default="WARNING", description="Log verbosity (level name or number)")
    threads: Optional[int] = Field(default=None, ge=1, description="Default worker count; None means all cores")
    output_float_format: str = Field(default="%.10g", description="printf format for floats in CSV outputs")

    def resolved_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Get the cached settings instance.

    Returns:
        Settings: values read from the environment on first call
    """
    return Settings()


class ColorLevelFormatter(logging.Formatter):
    """Formatter that colors the level name"""

    def format(self, record: logging.LogRecord) -> str:
        color = _LEVEL_COLORS.get(record.levelno, "")
        record.levelname_colored = f"{color}{record.levelname}{Style.RESET_ALL}"
        return super().format(record)


def parse_level(level: "str | int") -> int:
    if isinstance(level, int):
        return level
    text = str(level).strip()
    if text.isdigit():
        return int(text)
    value = logging.getLevelName(text.upper())
    if not isinstance(value, int):
        raise ValueError(f"Unknown log level: {level}")
    return value


def configure_logging(level: "str | int | None" = None) -> None:
    """
    Install one colored stream handler on the package logger.

    Args:
        level: Level name or number; defaults to the MXFAR_LOG setting
    """
    if level is None:
        level = get_settings().log
    package_logger = logging.getLogger("mxfar")
    package_logger.setLevel(parse_level(level))

    for handler in list(package_logger.handlers):
        package_logger.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(ColorLevelFormatter("%(levelname_colored)s %(name)s: %(message)s"))
    package_logger.addHandler(handler)
    package_logger.propagate = False
