import sys

from hazeforge.cli import main

sys.exit(main())
