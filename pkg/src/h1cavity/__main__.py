import sys

from h1cavity.pipeline.cli import main

sys.exit(main())
