"""Command-line entry point: ``waven {train,enhance,eval,gradcheck}``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
The seed comes from the config, is overridden by ``WAVEN_SEED`` and then by
``--seed``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
SEED_ENV = "WAVEN_SEED"

log = logging.getLogger("wavenhancer")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="waven", description="Wavelet-domain image enhancement.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every training step")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--seed", type=int, help=f"master seed (overrides {SEED_ENV} and the config)")
    p.add_argument("--out-dir", help="output directory (overrides out_dir in the config)")

    p = sub.add_parser("enhance", help="enhance one PNG with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="8-bit RGB PNG")
    p.add_argument("--output", required=True, help="PNG to write")

    p = sub.add_parser("eval", help="score a checkpoint on paired PNG directories")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input-dir", required=True)
    p.add_argument("--target-dir", required=True)
    p.add_argument("--out", required=True, help="metrics CSV to write")
    p.add_argument("--config", help="if given, its model keys must match the checkpoint")

    p = sub.add_parser("gradcheck", help="run the 64-bit finite-difference gradient suite")
    p.add_argument("--only", nargs="+", metavar="NAME", help="run a subset of the registered checks")
    p.add_argument("--list", action="store_true", help="list check names and exit")
    return parser


def resolve_seed(config_seed: int, flag: int | None, environ=os.environ) -> int:
    """Flag beats environment beats config."""
    if flag is not None:
        return flag
    env = environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return config_seed


def _load_config(path):
    from .training import TrainConfig
    path = Path(path)
    cfg = TrainConfig.from_file(path)
    # data paths are relative to the config file
    rebased = {}
    for key in ("input_dir", "target_dir", "manifest"):
        value = getattr(cfg, key)
        if value and not Path(value).is_absolute():
            rebased[key] = str(path.parent / value)
    return cfg.replace(**rebased) if rebased else cfg


def _cmd_train(args) -> int:
    from .training import train
    cfg = _load_config(args.config)
    cfg = cfg.with_seed(resolve_seed(cfg.seed, args.seed))
    out_dir = Path(args.out_dir or cfg.out_dir)
    result = train(cfg, out_dir)
    means = result.report.means
    print(f"trained {cfg.steps} steps ({cfg.model.ablation.label}, seed {cfg.seed}) -> {out_dir}")
    print(f"psnr_db={means['psnr_db']:.4f} ssim={means['ssim']:.6f} delta_e={means['delta_e']:.6f}")
    return EXIT_OK


def _cmd_enhance(args) -> int:
    from .training import load_checkpoint
    from .training.data import read_png, write_png
    from .training.evaluate import enhance_array
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.model_config
    image = read_png(args.input)
    write_png(args.output, enhance_array(image, ckpt.params(), cfg))
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .training import evaluate, load_checkpoint, load_dataset
    ckpt = load_checkpoint(args.checkpoint)
    expected = _load_config(args.config).model if args.config else None
    train_src, val_src = load_dataset(args.input_dir, args.target_dir)
    report = evaluate(ckpt, train_src + val_src, expected)
    report.write_csv(args.out)
    means = report.means
    print(f"{len(report.rows)} images: psnr_db={means['psnr_db']:.4f} ssim={means['ssim']:.6f} "
          f"delta_e={means['delta_e']:.6f} -> {args.out}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from . import gradsuite
    if args.list:
        print("\n".join(gradsuite.CHECKS))
        return EXIT_OK
    unknown = [n for n in args.only or () if n not in gradsuite.CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s): {', '.join(unknown)}")

    def report(res):
        print(f"{res.name:<20} {res.error:.3e}  {'ok' if res.ok else 'FAIL'}  ({res.seconds:.1f}s)", flush=True)

    results = gradsuite.run_all(args.only, report=report)
    worst = max(results, key=lambda r: r.error)
    print(f"max relative error {worst.error:.3e} ({worst.name}), tolerance {gradsuite.TOLERANCE:.0e}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_RUNTIME


COMMANDS = {"train": _cmd_train, "enhance": _cmd_enhance, "eval": _cmd_eval, "gradcheck": _cmd_gradcheck}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"waven: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
