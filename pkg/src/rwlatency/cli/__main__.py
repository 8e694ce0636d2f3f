import sys

from rwlatency.cli.main import main

sys.exit(main())
