import structlog
import logging
import sys
from typing import Optional
from .config import get_settings


# ============================================================================
# Processor pour arrondir les métriques flottantes dans les logs
# ============================================================================
def round_floats(logger, method_name, event_dict):
    for key, value in event_dict.items():
        if isinstance(value, float):
            event_dict[key] = round(value, 6)
    return event_dict


# ============================================================================
# Configuration centrale du logging
# ============================================================================
def configure_logging(level: Optional[str] = None, log_format: Optional[str] = None):
    """Configure structured logging (sur stderr: stdout est réservé aux sorties des commandes)"""

    settings = get_settings()
    level_name = (level or settings.log_level).upper()
    renderer_name = log_format or settings.log_format

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, level_name, logging.INFO),
        force=True,
    )

    renderer = (
        structlog.processors.JSONRenderer()
        if renderer_name == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            round_floats,
            renderer
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
