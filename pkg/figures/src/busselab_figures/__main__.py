import sys

from busselab_figures.cli import main

sys.exit(main())
