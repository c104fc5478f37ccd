import sys

from dotenv import load_dotenv

from quantguard.cli import parse_and_dispatch

# QG_DATA_DIR may come from .env
load_dotenv()

if __name__ == "__main__":
    sys.exit(parse_and_dispatch(sys.argv[1:], configure_logging=True))
