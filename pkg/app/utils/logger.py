# Structured logging
import logging
import os
import time
from datetime import datetime

# --- Setup Log Directory ---
from pathlib import Path

# Compute project root locally to avoid import cycles with `app.config_loader`
PROJECT_ROOT = Path(__file__).resolve().parents[2]
LOG_DIR = os.getenv("LOG_DIR") or os.path.join(str(PROJECT_ROOT), "Log")
os.makedirs(LOG_DIR, exist_ok=True)

LOG_FORMAT = "%(asctime)s - %(module)s:%(lineno)d - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def get_daily_log_path() -> str:
    """Generate a log file path with the current date"""
    today = datetime.now().strftime("%Y-%m-%d")
    return os.path.join(LOG_DIR, f"app_{today}.log")


def _resolve_level(level: int | str | None) -> int:
    if level is None:
        env_level = os.getenv("ENV_LOG_LEVEL")
        level = env_level if env_level else logging.DEBUG
    try:
        resolved = logging.getLevelName(level.upper()) if isinstance(level, str) else int(level)
        # getLevelName hands back "Level X" strings for unknown names
        if isinstance(resolved, str):
            resolved = logging.DEBUG
    except Exception:
        resolved = logging.DEBUG
    return resolved


def setup_logging(name: str = __name__, level: int | str | None = None) -> logging.Logger:
    """Setup structured logging with daily files and noise suppression.

    Args:
        name: The module name to attach to the logger.
        level: Optional logging level (int or string like 'INFO').
            If None, uses the ENV_LOG_LEVEL environment variable or defaults to DEBUG.
            ENV_LOG_LEVEL, when set, caps the verbosity of every module so the CLI
            ``--log-level`` flag applies globally.
    """
    log_path = get_daily_log_path()

    logger = logging.getLogger(name)
    resolved_level = _resolve_level(level)
    env_level = os.getenv("ENV_LOG_LEVEL")
    if env_level and level is not None:
        resolved_level = max(resolved_level, _resolve_level(env_level))
    logger.setLevel(resolved_level)
    logger.propagate = False  # prevent bubbling to root logger

    # Clear old handlers
    if logger.handlers:
        for h in logger.handlers[:]:
            logger.removeHandler(h)

    formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)

    try:
        file_handler = logging.FileHandler(log_path, mode="a", encoding="utf-8")
        file_handler.setFormatter(formatter)
        file_handler.setLevel(resolved_level)
        logger.addHandler(file_handler)
    except Exception:
        pass

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(resolved_level)
    logger.addHandler(console_handler)

    noisy_libs = ["asyncio", "matplotlib", "PIL", "numba"]
    for lib in noisy_libs:
        logging.getLogger(lib).setLevel(logging.WARNING)

    return logger


def reconfigure_loggers(level: int | str) -> None:
    """Apply a new level to every logger already created through setup_logging."""
    os.environ["ENV_LOG_LEVEL"] = str(level)
    resolved = _resolve_level(level)
    for name in list(logging.Logger.manager.loggerDict):
        if not name.startswith("app"):
            continue
        existing = logging.getLogger(name)
        existing.setLevel(resolved)
        for handler in existing.handlers:
            handler.setLevel(resolved)


def cleanup_old_logs(days_to_keep: int = 30) -> int:
    """Delete log files older than specified days. Returns the number removed."""
    now = time.time()
    removed = 0
    for filename in os.listdir(LOG_DIR):
        if filename.startswith("app_") and filename.endswith(".log"):
            file_path = os.path.join(LOG_DIR, filename)
            try:
                if os.path.getmtime(file_path) < now - (days_to_keep * 86400):
                    os.remove(file_path)
                    removed += 1
                    logging.getLogger(__name__).info("Deleted old log file: %s", filename)
            except OSError:
                pass
    return removed
