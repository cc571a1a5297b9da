import sys

from hodograph.cli import main

sys.exit(main())
