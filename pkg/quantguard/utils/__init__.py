from .console import Colors, display_comparison, handle_execution_error, setup_logging

__all__ = ["Colors", "display_comparison", "handle_execution_error", "setup_logging"]
