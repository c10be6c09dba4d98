"""Boundary flux of evolved Robin-box states under grid refinement."""

import argparse
import json
from pathlib import Path

import numpy as np

from boxmom.evolution import evolve
from boxmom.experiments import ExperimentConfig, _grid_run_setup

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", type=Path, default=ROOT / "configs" / "evolve.json")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--levels", type=int, default=3)
    args = p.parse_args()
    cfg = ExperimentConfig.from_dict(json.loads(args.config.read_text()), "evolve", args.config.parent)
    h0 = cfg.numerics.h
    print("h,max_flux,max_flux_over_h2,norm_drift")
    prev = None
    for i in range(args.levels):
        h = h0 / 2 ** i
        _, V, H, s = _grid_run_setup(cfg, h, np.random.default_rng(cfg.seed))
        run = evolve(s, H, cfg.numerics.dt, args.steps, V)
        flux = float(run.flux.max())
        drift = float(np.max(np.abs(run.norm - run.norm[0])))
        print(f"{h:.6g},{flux:.6e},{flux / h ** 2:.4f},{drift:.3e}")
        if prev is not None:
            print(f"# observed order {np.log2(prev / flux):.3f}")
        prev = flux
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
