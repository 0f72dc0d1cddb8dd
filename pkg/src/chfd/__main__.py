"""Allow ``python -m chfd`` as an alias for the ``chfd`` script."""

import sys

from .cli import main

sys.exit(main())
