import sys

from ellipsar.cli import main

sys.exit(main())
