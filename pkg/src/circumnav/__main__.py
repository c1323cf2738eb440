import sys

from circumnav.cli import main

sys.exit(main())
