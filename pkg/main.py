# Entry point for the stability test command line
# This file serves as the main entry point for the application

import sys
from src.core.main import main

if __name__ == "__main__":
    sys.exit(main())
