#!/usr/bin/env python3
"""Print the noise-scale table for both Gaussian calibrations.

Thin wrapper over `hetdp calibrate`; forwards any extra flags unchanged, so
`python3 scripts/calibration_table.py --epsilons 0.25,0.5 --json` works.
"""

import sys

from hetdp.cli import main as cli_main

if __name__ == "__main__":
    sys.exit(cli_main(["calibrate", *sys.argv[1:]]))
