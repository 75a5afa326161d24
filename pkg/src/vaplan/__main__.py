import sys

from vaplan.cli import main

sys.exit(main())
