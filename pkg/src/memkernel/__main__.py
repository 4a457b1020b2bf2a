import sys

from memkernel.cli import main

sys.exit(main())
