import logging
import sys

from quantguard.errors import CheckpointError, ConfigError, DivergenceError, IdxFormatError

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


# ANSI color codes for terminal output
class Colors:
    RESET = "\033[0m"
    BOLD = "\033[1m"
    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    CYAN = "\033[36m"
    MAGENTA = "\033[35m"
    ENDC = RESET
    WARNING = YELLOW
    HEADER = MAGENTA


def setup_logging(verbose=False):
    """One stdout handler on the root logger."""
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.handlers = [handler]
    return logger


def display_comparison(comparison, stream=None):
    """Print a reproduce comparison with pass cells in green and fail cells in red."""
    stream = stream or sys.stdout
    print(f"\n{Colors.HEADER}📊 reproduce {comparison.target}{Colors.ENDC}", file=stream)
    print(f"{Colors.CYAN}{comparison.metadata.get('description', '')}{Colors.ENDC}", file=stream)
    header = f"{'variant':<12} {'bits':>4} {'bnn':>5} {'eps':>5} {'measure':<12} {'ours':>10} {'paper':>6} {'delta':>7}  pass"
    print(header, file=stream)
    for row in comparison.rows:
        cells = row.cells()
        verdict = cells[8]
        color = Colors.GREEN if verdict.endswith("pass") else Colors.RED if verdict.endswith("fail") else ""
        print(
            f"{cells[0]:<12} {cells[1]:>4} {cells[2]:>5} {cells[3]:>5} {cells[4]:<12} "
            f"{cells[5]:>10} {cells[6]:>6} {cells[7]:>7}  {color}{verdict}{Colors.ENDC if color else ''}",
            file=stream,
        )
    for check in comparison.checks:
        mark = f"{Colors.GREEN}✅" if check.passed else f"{Colors.RED}❌"
        print(f"{mark} {check.name} ({check.holds}/{check.total}){Colors.ENDC}", file=stream)
    verdict = f"{Colors.GREEN}PASS" if comparison.passed else f"{Colors.RED}FAIL"
    print(f"{Colors.BOLD}{verdict}{Colors.ENDC}\n", file=stream)


def handle_execution_error(error, stream=None):
    """One-line diagnostic for a failed command, categorized by error type."""
    stream = stream or sys.stderr
    if isinstance(error, ConfigError):
        prefix = "⚙️  Config error"
    elif isinstance(error, (IdxFormatError, FileNotFoundError)):
        prefix = "📂 Input error"
    elif isinstance(error, CheckpointError):
        prefix = "💾 Checkpoint error"
    elif isinstance(error, DivergenceError):
        prefix = "📉 Training diverged"
    else:
        prefix = "❌ Error"
    print(f"{Colors.RED}{prefix}: {error}{Colors.ENDC}", file=stream)
