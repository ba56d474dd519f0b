#!/usr/bin/env python3
"""Quick look at the two proposal losses along a translation sweep."""

import numpy as np

from prefield.experiments import ScanConfig, run_loss_scan

if __name__ == "__main__":
    out = run_loss_scan(ScanConfig(steps=2000), out_dir="out/loss-scan-demo")
    aa, base = out["antialiased"], out["baseline"]
    print(f"antialiased: max adjacent diff {np.abs(np.diff(aa)).max():.3e}")
    print(f"baseline:    max adjacent jump {np.abs(np.diff(base)).max():.3e} "
          f"(median {np.median(np.abs(np.diff(base))):.3e})")
    print(f"wrote {out['csv']}")
