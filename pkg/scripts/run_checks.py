#!/usr/bin/env python3
"""Run the full measurable-check suite on the bundled single-bubble config."""

import pathlib
import sys

from sinhpierce.cli import run
from sinhpierce.runconfig import parse_config


def main():
    cfg_path = pathlib.Path(__file__).resolve().parent.parent / "configs" / "single_bubble.cfg"
    rc = parse_config(cfg_path.read_text())
    rc.command = "verify"
    rc.out_dir = "out/checks"
    code = run(rc)
    print(f"checks written to {rc.out_dir}/checks.csv (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
