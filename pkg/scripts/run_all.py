#!/usr/bin/env python3
"""Run every experiment with the shipped configs into out/."""

import sys
from pathlib import Path

from prefield.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    rc = 0
    for name in ("toy1d", "loss-scan", "moments", "sample-sweep"):
        config = ROOT / "configs" / f"{name.replace('-', '_')}.ini"
        rc |= main([name, "--config", str(config), "--out", f"out/{name}"])
    rc |= main(["selfcheck"])
    sys.exit(rc)
