# Proxy entrypoint so the harness runs as `python main.py <command> ...`
# without installing the package; the CLI itself lives in src/cli.py.

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
