"""Embedded page store with transparent data encryption."""

from .engine import ExecutionResult, ServerInstance, open_instance, restart_instance
from .errors import TDEError
from .keyvault import KeyStore
from .pager import PAGE_SIZE, PAYLOAD_SIZE, Database, SizeSpec
from .tdeparser import parse_script, split_batches

__all__ = [
    "Database", "ExecutionResult", "KeyStore", "PAGE_SIZE", "PAYLOAD_SIZE", "ServerInstance",
    "SizeSpec", "TDEError", "open_instance", "parse_script", "restart_instance", "split_batches",
]
__version__ = "0.1.0"
