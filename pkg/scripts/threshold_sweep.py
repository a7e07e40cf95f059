"""Stage-two accuracy versus the calibration-error filtering threshold.

    python3 scripts/threshold_sweep.py --flip-fraction 0.3 --out sweep.csv
"""

import argparse
from dataclasses import replace

import numpy as np

from acciturn.evaluation import sweep_csv
from acciturn.pipeline import DemoConfig, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--thresholds-deg", type=float, nargs="+", default=[3, 5, 7, 10, 15, 45, 90, 180])
    ap.add_argument("--flip-fraction", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = DemoConfig().with_seed(args.seed)
    cfg = replace(cfg, synth=replace(cfg.synth, flip_fraction=args.flip_fraction))
    text = sweep_csv(run_sweep(cfg, np.deg2rad(sorted(args.thresholds_deg))))
    print(text, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
