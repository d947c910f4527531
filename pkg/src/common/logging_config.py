"""
Logging setup for the pipeline.

Each pipeline stage logs to its own file under ``logs/pipeline/``; errors
from every stage are also collected in ``logs/error.log`` and stage timings
go to ``logs/performance.log``.
"""

import logging
import logging.config
import time
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

LOG_DIR = Path(__file__).resolve().parent.parent.parent / "logs"

# Pipeline stages that get their own file under logs/pipeline/
PIPELINE_LOGGERS = ("render", "ledger", "corpus", "protocol", "scoring", "simlab")

# Libraries that only report warnings and above
QUIET_LIBRARIES = ("urllib3", "requests", "PIL", "filelock", "transformers")

DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _rotating(filename: Path, max_mb: int, backups: int, level: Optional[str] = None,
              formatter: str = "detailed") -> Dict[str, Any]:
    handler = {
        "class": "logging.handlers.RotatingFileHandler",
        "filename": str(filename),
        "maxBytes": max_mb * 1024 * 1024,
        "backupCount": backups,
        "formatter": formatter,
        "encoding": "utf-8",
        "delay": True,
    }
    if level:
        handler["level"] = level
    return handler


def _logger(handlers: Iterable[str], level: str = "INFO", propagate: bool = False) -> Dict[str, Any]:
    return {"handlers": list(handlers), "level": level, "propagate": propagate}


def build_logging_config(log_dir: Path = LOG_DIR) -> Dict[str, Any]:
    """
    Build the dictConfig mapping for the pipeline.

    Args:
        log_dir: Root directory for every log file

    Returns:
        Dictionary suitable for logging.config.dictConfig
    """
    stage_dir = log_dir / "pipeline"
    handlers: Dict[str, Dict[str, Any]] = {
        "console": {"class": "logging.StreamHandler", "formatter": "simple", "level": "INFO"},
        "app_file": _rotating(log_dir / "app.log", 10, 10),
        "error_file": _rotating(log_dir / "error.log", 5, 5, level="ERROR"),
        "endpoint_file": _rotating(log_dir / "endpoints.log", 10, 7),
        "cli_file": _rotating(stage_dir / "pipeline_cli.log", 5, 5),
        "performance_file": _rotating(log_dir / "performance.log", 5, 3, formatter="performance"),
        "debug_daily": {
            "class": "logging.handlers.TimedRotatingFileHandler",
            "filename": str(log_dir / "debug.log"),
            "when": "midnight",
            "backupCount": 7,
            "formatter": "detailed",
            "encoding": "utf-8",
            "delay": True,
        },
    }

    loggers: Dict[str, Dict[str, Any]] = {}
    for name in PIPELINE_LOGGERS:
        handlers[f"{name}_file"] = _rotating(stage_dir / f"{name}.log", 10, 7)
        loggers[name] = _logger(["console", f"{name}_file", "error_file"])

    loggers["pipeline_cli"] = _logger(["console", "cli_file", "error_file"])
    loggers["endpoints"] = _logger(["endpoint_file", "error_file"])
    loggers["app_config"] = _logger(["app_file"], propagate=True)
    loggers["performance"] = _logger(["performance_file"])
    for library in QUIET_LIBRARIES:
        loggers[library] = _logger(["error_file"], level="WARNING")

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "detailed": {
                "format": "%(asctime)s.%(msecs)03d [%(levelname)8s] [%(name)s] [%(threadName)s] "
                          "%(module)s.%(funcName)s:%(lineno)d - %(message)s",
                "datefmt": DATE_FORMAT,
            },
            "standard": {"format": "%(asctime)s [%(levelname)8s] %(name)s: %(message)s", "datefmt": DATE_FORMAT},
            "simple": {"format": "[%(levelname)s] %(name)s: %(message)s"},
            "performance": {"format": "%(asctime)s.%(msecs)03d [PERF] %(message)s", "datefmt": DATE_FORMAT},
        },
        "handlers": handlers,
        "loggers": loggers,
        "root": {"handlers": ["console", "app_file", "error_file"], "level": "INFO"},
    }


def setup_logging(debug_mode: bool = False, log_dir: Path = LOG_DIR) -> Dict[str, Any]:
    """
    Apply the pipeline logging configuration.

    Args:
        debug_mode: Lower every pipeline logger to DEBUG and add the daily debug file
        log_dir: Root directory for log files, created here

    Returns:
        The configuration mapping that was applied
    """
    log_dir = Path(log_dir)
    (log_dir / "pipeline").mkdir(parents=True, exist_ok=True)

    config = build_logging_config(log_dir)
    if debug_mode:
        config["root"]["level"] = "DEBUG"
        config["root"]["handlers"].append("debug_daily")
        for name in (*PIPELINE_LOGGERS, "pipeline_cli", "endpoints"):
            config["loggers"][name]["level"] = "DEBUG"

    logging.config.dictConfig(config)
    logging.getLogger("app_config").info(f"Logging to {log_dir} (debug={debug_mode})")
    return config


def get_performance_logger() -> logging.Logger:
    return logging.getLogger("performance")


def log_system_info():
    """Log the host and library versions a run was produced with."""
    import platform
    import sys

    import numpy
    import pandas
    import PIL
    import psutil

    logger = logging.getLogger("app_config")
    memory_gb = psutil.virtual_memory().total / (1024 ** 3)
    logger.info(f"Host: {platform.platform()} | Python {sys.version.split()[0]} | "
                f"{psutil.cpu_count()} CPUs | {memory_gb:.1f} GB RAM")
    logger.info(f"Libraries: Pillow {PIL.__version__}, numpy {numpy.__version__}, pandas {pandas.__version__}")


def log_performance_metric(operation: str, duration: float, **kwargs):
    """
    Write one timing record to the performance log.

    Args:
        operation: Stage or step name
        duration: Elapsed seconds
        **kwargs: Extra fields (preset, documents, episodes, ...)
    """
    fields = " ".join(f"{key}={value}" for key, value in kwargs.items())
    get_performance_logger().info(f"{operation} took {duration:.4f}s {fields}".rstrip())


class LogPerformance:
    """Context manager timing one pipeline stage."""

    def __init__(self, operation: str, logger_name: str = "performance", **kwargs):
        self.operation = operation
        self.logger = logging.getLogger(logger_name)
        self.kwargs = kwargs
        self.start_time: Optional[float] = None
        self.duration: Optional[float] = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.logger.debug(f"Starting {self.operation}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.duration = time.perf_counter() - self.start_time
        if exc_type is None:
            log_performance_metric(self.operation, self.duration, **self.kwargs)
        else:
            self.logger.error(f"{self.operation} failed after {self.duration:.3f}s: {exc_val}")
        return False
