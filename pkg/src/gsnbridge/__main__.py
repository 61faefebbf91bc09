import sys

from gsnbridge.cli import main

sys.exit(main())
