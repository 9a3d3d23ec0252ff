#!/usr/bin/env python3
"""Recompute every benchmark table and write one CSV per table.

Usage: python scripts/reproduce_tables.py [outdir]
"""

import sys

from escert.cli import main

if __name__ == "__main__":
    outdir = sys.argv[1] if len(sys.argv) > 1 else "tables_out"
    sys.exit(main(["tables", "--outdir", outdir]))
