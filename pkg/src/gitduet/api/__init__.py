"""HTTP and WebSocket surface."""

from .app import create_app
from .errormap import ERROR_STATUS, status_for

__all__ = ["ERROR_STATUS", "create_app", "status_for"]
