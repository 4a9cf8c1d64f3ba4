from .commands import build_parser, main
from .exception_handlers import EXIT_CODES, exit_code_for, handle_exception

__all__ = ["build_parser", "main", "EXIT_CODES", "exit_code_for", "handle_exception"]
