import sys

from pinyinlm.cli import main

sys.exit(main())
