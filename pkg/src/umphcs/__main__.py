import sys

from .opcli.cli import main

sys.exit(main())
