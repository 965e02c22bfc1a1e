"""Allow `python -m tablehelm` as an alias for the console script."""

import sys

from tablehelm.cli import main

if __name__ == "__main__":
    sys.exit(main())
