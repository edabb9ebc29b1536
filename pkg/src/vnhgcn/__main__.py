import sys

from vnhgcn.cli import main

sys.exit(main())
