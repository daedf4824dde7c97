"""Entry point for python -m radonbl"""

import sys

from radonbl.main import main

if __name__ == "__main__":
    sys.exit(main())
