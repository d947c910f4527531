"""
Common infrastructure for the lens-vlm pipeline: logging, configuration,
wire models and endpoint clients.
"""

from .app_config import ConfigError, get_config, load_config, resolve_secret
from .logging_config import (
    setup_logging,
    get_performance_logger,
    log_performance_metric,
    log_system_info,
    LogPerformance,
)
from .models import EndpointConfig, PipelineConfig, RawSampleRecord, PageManifest
from .endpoints import (
    EndpointError,
    EndpointAuthError,
    HttpChatEndpoint,
    HttpOcrEndpoint,
    ScriptedEndpoint,
    ScriptedOcr,
    create_chat_endpoint,
    create_ocr_endpoint,
)

__all__ = [
    'ConfigError',
    'get_config',
    'load_config',
    'resolve_secret',
    'setup_logging',
    'get_performance_logger',
    'log_performance_metric',
    'log_system_info',
    'LogPerformance',
    'EndpointConfig',
    'PipelineConfig',
    'RawSampleRecord',
    'PageManifest',
    'EndpointError',
    'EndpointAuthError',
    'HttpChatEndpoint',
    'HttpOcrEndpoint',
    'ScriptedEndpoint',
    'ScriptedOcr',
    'create_chat_endpoint',
    'create_ocr_endpoint',
]
