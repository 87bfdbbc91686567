import sys

from ctxfusion.cli import main

sys.exit(main())
