"""Run the overfit setup for all four stage combinations and write a method/PSNR/SSIM/Delta E table.

    python3 scripts/run_ablation.py --out runs/ablation --steps 2000
"""

import argparse
import tempfile
from pathlib import Path

from wavenhancer.training.ablation import OVERFIT_STEPS, make_overfit_data, run_ablation, write_ablation_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--steps", type=int, default=OVERFIT_STEPS)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    def report(row):
        print(f"{row.method:<10} psnr {row.psnr_db:7.3f}  ssim {row.ssim:.4f}  dE {row.delta_e:.4f}  "
              f"({row.seconds:.0f}s)", flush=True)

    with tempfile.TemporaryDirectory() as tmp:
        rows = run_ablation(make_overfit_data(tmp, seed=args.seed), args.out, args.steps, seed=args.seed, report=report)
    write_ablation_csv(Path(args.out) / "ablation.csv", rows)
    print(f"wrote {Path(args.out) / 'ablation.csv'}")


if __name__ == "__main__":
    main()
