import sys

from cpomdp.cli import main

sys.exit(main())
