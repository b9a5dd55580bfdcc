#!/usr/bin/env python3
"""Run the blackbody experiment; extra flags pass through (--scale, --seed, --out)."""
import sys

from pireg.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "blackbody", *sys.argv[1:]]))
