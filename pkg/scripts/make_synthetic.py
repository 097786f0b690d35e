"""Write synthetic input/target PNG pairs plus a manifest.

    python3 scripts/make_synthetic.py data/synthetic --count 4 --size 64
"""

import argparse

from wavenhancer.training.synthetic import write_pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root")
    ap.add_argument("--count", type=int, default=4)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--val", type=int, default=0, help="how many of the pairs go to the val split")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = write_pairs(args.root, args.count, args.size, args.seed, args.val)
    print(f"wrote {args.count} pairs to {root}")


if __name__ == "__main__":
    main()
