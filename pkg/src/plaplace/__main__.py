import sys

from plaplace.cli import main

sys.exit(main())
