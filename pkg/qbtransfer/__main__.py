"""Allow ``python -m qbtransfer``."""

import sys

from qbtransfer.cli import main

sys.exit(main())
