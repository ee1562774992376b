import sys

from semigen.cli import main

sys.exit(main())
