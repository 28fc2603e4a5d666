import sys

from fockdyn.experiments.cli import main

sys.exit(main())
