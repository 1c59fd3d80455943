#!/usr/bin/env python3
"""Command-line launcher"""
import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
