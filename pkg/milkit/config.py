"""
Configuration settings for the milkit deep MIL toolkit
"""

import logging
import os
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

# Try to load environment variables, but don't fail if .env is missing
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


def _env_flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == "true"


class Settings:
    """Process-wide settings loaded from environment variables"""

    app_name: str = "milkit"
    version: str = "0.1.0"

    # Data locations
    data_root: str = os.getenv("MILKIT_DATA_ROOT", "./data")
    output_dir: str = os.getenv("MILKIT_OUTPUT_DIR", "./runs")

    # Compute
    device: str = os.getenv("MILKIT_DEVICE", "cpu")
    show_progress: bool = _env_flag("MILKIT_SHOW_PROGRESS", "false")

    # Logging Configuration
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_file: Optional[str] = os.getenv("LOG_FILE") or None

    def resolve_data_path(self, path: str) -> str:
        """Resolve a dataset path against MILKIT_DATA_ROOT unless it is absolute or exists as given"""
        if os.path.isabs(path) or os.path.exists(path):
            return path
        return os.path.join(os.getenv("MILKIT_DATA_ROOT", self.data_root), path)


# Create global settings instance
settings = Settings()

_logging_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """Install the rich console handler (and optional file handler) on the package logger"""
    global _logging_configured
    logger = logging.getLogger("milkit")
    logger.setLevel((level or settings.log_level).upper())
    if _logging_configured:
        return

    logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True))
    if settings.log_file:
        file_handler = logging.FileHandler(settings.log_file)
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        logger.addHandler(file_handler)
    _logging_configured = True
