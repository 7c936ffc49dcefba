import sys

from bandfec.cli import main

sys.exit(main())
