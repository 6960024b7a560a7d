import sys

from nlstm.main import main

sys.exit(main())
