#!/usr/bin/env python3
"""
Command-line entry for the mxfar pipeline

Loads a .env file (MXFAR_LOG, MXFAR_THREADS, ...) before any settings are
read, then hands the arguments to mxfar.cli.run.

    ./cli-interface/cli.py simulate --kind expar --seed 7 --output-dir sim
"""

import os
import sys
from colorama import init
from dotenv import load_dotenv

# Add parent directory to path to import our library
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

load_dotenv()

# Initialize colorama for cross-platform colored output
init(autoreset=True)

from mxfar.cli import run  # noqa: E402


def main():
    """Main CLI entry point"""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
