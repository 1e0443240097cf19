import sys

from isinglearn.app import main

sys.exit(main())
