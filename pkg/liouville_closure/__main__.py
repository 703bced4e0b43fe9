"""Allow ``python -m liouville_closure``."""

import sys

from .cli import main

sys.exit(main())
