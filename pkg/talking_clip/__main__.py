import sys

from talking_clip.main import main

if __name__ == "__main__":
    sys.exit(main())
