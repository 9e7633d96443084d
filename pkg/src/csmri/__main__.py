import sys

from csmri.cli import main

sys.exit(main())
