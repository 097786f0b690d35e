"""Overfit one stage combination on four synthetic 64x64 pairs and report the loss drop.

    python3 scripts/run_overfit.py --out runs/overfit --steps 2000
"""

import argparse
import tempfile

from wavenhancer.training.ablation import OVERFIT_STEPS, make_overfit_data, run_overfit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/overfit")
    ap.add_argument("--steps", type=int, default=OVERFIT_STEPS)
    ap.add_argument("--stage1", choices=("gsr", "unet"), default="gsr")
    ap.add_argument("--stage2", choices=("dpr", "unet"), default="dpr")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        data = make_overfit_data(tmp, seed=args.seed)
        result, row = run_overfit(data, args.out, args.stage1, args.stage2, args.steps, args.seed)
    print(result.report.to_csv(), end="")
    print(f"{row.method}: {row.seconds:.0f}s, loss@10 {row.loss_at_10:.4f} -> loss@{args.steps} {row.final_loss:.4f} "
          f"({row.final_loss / row.loss_at_10:.1%})")


if __name__ == "__main__":
    main()
