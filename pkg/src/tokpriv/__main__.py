import sys

from tokpriv.cli import main

sys.exit(main())
