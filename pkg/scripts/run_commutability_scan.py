"""Verdicts and corner residuals for rounded rectangles over a range of radii."""

import argparse

import numpy as np

from boxmom.commutability import classify_region, corner_arc_residual, joint_modes_rectangle
from boxmom.geometry import Region


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--lx", type=float, default=2.0)
    p.add_argument("--ly", type=float, default=1.0)
    p.add_argument("--radii", type=float, nargs="+", default=[0.0, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1])
    p.add_argument("--n-max", type=int, default=3)
    args = p.parse_args()
    print("r,verdict,min_arc_residual,max_arc_residual")
    for r in args.radii:
        reg = (Region.rectangle(args.lx, args.ly) if r == 0
               else Region.rounded_rectangle(args.lx, args.ly, r))
        v = classify_region(reg)
        if r == 0:
            print(f"0,{v.verdict},,")
            continue
        vals = [corner_arc_residual(reg, m)
                for m in joint_modes_rectangle(reg, None, (0, args.n_max), (0, args.n_max))
                if m.mu_norm > 0]
        print(f"{r:g},{v.verdict},{np.min(vals):.4f},{np.max(vals):.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
