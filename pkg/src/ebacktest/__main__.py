import sys

from ebacktest.cli import main

sys.exit(main())
