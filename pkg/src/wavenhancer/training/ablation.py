"""Overfit runs on synthetic pairs and the four-way stage-substitution table."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

from .config import TrainConfig
from .loop import TrainResult, train
from .synthetic import write_pairs

OVERFIT_STEPS = 2000
COMBINATIONS = (("gsr", "dpr"), ("gsr", "unet"), ("unet", "dpr"), ("unet", "unet"))
ABLATION_HEADER = ("method", "psnr_db", "ssim", "delta_e")


def overfit_config(data_root, steps: int = OVERFIT_STEPS, stage1: str = "gsr", stage2: str = "dpr",
                   seed: int = 0) -> TrainConfig:
    """Memorization setup: 64x64 crops of 64x64 pairs, flips kept, colour jitter off.

    Jitter is disabled because it perturbs the input away from the fixed
    transform the target encodes, which caps the reachable PSNR.
    """
    root = Path(data_root)
    cfg = TrainConfig(input_dir=str(root / "input"), target_dir=str(root / "target"),
                      manifest=str(root / "manifest.txt"), steps=steps, crop=64, checkpoint_every=0,
                      brightness_jitter=0.0, saturation_jitter=0.0)
    return cfg.replace(stage1=stage1, stage2=stage2, seed=seed)


@dataclass
class AblationRow:
    method: str
    psnr_db: float
    ssim: float
    delta_e: float
    loss_at_10: float
    final_loss: float
    seconds: float

    @classmethod
    def from_result(cls, method: str, result: TrainResult, seconds: float) -> "AblationRow":
        means = result.report.means
        totals = [row["total"] for row in result.losses]
        at10 = totals[9] if len(totals) >= 10 else float("nan")
        return cls(method, means["psnr_db"], means["ssim"], means["delta_e"], at10,
                   totals[-1] if totals else float("nan"), seconds)


def run_overfit(data_root, out_dir, stage1: str = "gsr", stage2: str = "dpr",
                steps: int = OVERFIT_STEPS, seed: int = 0) -> tuple[TrainResult, AblationRow]:
    cfg = overfit_config(data_root, steps, stage1, stage2, seed)
    start = time.perf_counter()
    result = train(cfg, out_dir)
    return result, AblationRow.from_result(cfg.model.ablation.label, result, time.perf_counter() - start)


def run_ablation(data_root, out_root, steps: int = OVERFIT_STEPS, combinations=COMBINATIONS,
                 seed: int = 0, report=None) -> list[AblationRow]:
    """Train every stage combination on the same data; one row per combination."""
    rows = []
    for stage1, stage2 in combinations:
        _, row = run_overfit(data_root, Path(out_root) / f"{stage1}_{stage2}", stage1, stage2, steps, seed)
        if report is not None:
            report(row)
        rows.append(row)
    return rows


def write_ablation_csv(path, rows: list[AblationRow]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ABLATION_HEADER)
        for r in rows:
            writer.writerow([r.method, f"{r.psnr_db:.4f}", f"{r.ssim:.6f}", f"{r.delta_e:.6f}"])


def make_overfit_data(root, seed: int = 0) -> Path:
    """Four 64x64 training pairs, no validation split."""
    return write_pairs(root, count=4, size=64, seed=seed)
