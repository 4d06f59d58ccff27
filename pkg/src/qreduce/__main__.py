import sys

from qreduce.cli import main

sys.exit(main())
