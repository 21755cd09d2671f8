import sys

from chaselab.cli import main

sys.exit(main())
