"""
Logging configuration: JSON or plain-text records on stderr
"""

import json
import logging
import sys
from datetime import datetime, timezone

SERVICE_NAME = "hankelnet"


class JSONFormatter(logging.Formatter):
    def format(self, record):
        log_entry = {
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'level': record.levelname,
            'service': SERVICE_NAME,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }
        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)
        return json.dumps(log_entry)


def setup_logging(level: str = "INFO", fmt: str = "text", stream=None) -> logging.Handler:
    """Install a single stderr handler on the root logger"""
    handler = logging.StreamHandler(stream or sys.stderr)
    if fmt.lower() == 'json':
        handler.setFormatter(JSONFormatter())
    else:
        handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))

    root_logger = logging.getLogger()
    for existing in list(root_logger.handlers):
        if getattr(existing, '_hankelnet', False):
            root_logger.removeHandler(existing)
    handler._hankelnet = True
    root_logger.addHandler(handler)
    root_logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    return handler
