"""End-to-end training: sample, augment, forward, loss, backward, Adam."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..losses import FeatureExtractor, LossBreakdown, total_loss
from ..tensorad import AdamState, Tape, Tensor, adam_step
from ..wavelet import dwt2
from .checkpoint import Checkpoint, save_checkpoint
from .config import TrainConfig
from .data import PairedSample, augment_pair, load_dataset
from .evaluate import EvalReport, evaluate
from .pipeline import init_model, forward_pipeline

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "id", "total", "perceptual", "refinement", "smooth_final", "smooth_hf")


class TrainingDivergedError(RuntimeError):
    def __init__(self, step: int, breakdown: LossBreakdown):
        self.step = step
        self.breakdown = breakdown
        super().__init__(f"non-finite loss at step {step}: {breakdown.as_row()}")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    losses: list[dict] = field(default_factory=list)
    report: EvalReport | None = None
    out_dir: Path | None = None


def train_step(params, adam: AdamState, sample: PairedSample, cfg: TrainConfig,
               extractor: FeatureExtractor, step: int) -> LossBreakdown:
    x = Tensor(sample.input)
    y = Tensor(sample.target)
    target_bands = dwt2(y)
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        out = forward_pipeline(x, params, cfg.model)
        loss, breakdown = total_loss(out.final, y, out.ll_enh, target_bands.ll, out.hf_enh,
                                     target_bands.high, extractor, cfg.loss_weights)
    if not math.isfinite(breakdown.total):
        raise TrainingDivergedError(step, breakdown)
    tape.backward(loss)
    grads = {k: p.grad for k, p in params.items() if p.grad is not None}
    adam_step(params, grads, adam, cfg.lr)
    return breakdown


def train_samples(cfg: TrainConfig, samples: list[PairedSample], eval_samples=None,
                  out_dir=None) -> TrainResult:
    """Train on in-memory samples. With ``out_dir`` set, checkpoints and logs are written there."""
    if not samples:
        raise ValueError("no training samples")
    params = init_model(cfg.model)
    adam = AdamState.zeros_like(params)
    extractor = FeatureExtractor(seed=cfg.seed + 5)
    rng = np.random.default_rng([cfg.seed, 1])
    out_dir = Path(out_dir) if out_dir is not None else None

    losses: list[dict] = []
    order: list[int] = []
    for step in range(1, cfg.steps + 1):
        if not order:
            order = [int(i) for i in rng.permutation(len(samples))]
        sample = augment_pair(samples[order.pop(0)], rng, cfg.crop, flip=cfg.flip,
                              brightness=cfg.brightness_jitter, saturation=cfg.saturation_jitter)
        breakdown = train_step(params, adam, sample, cfg, extractor, step)
        losses.append({"step": step, "id": sample.id, **breakdown.as_row()})
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d %s total=%.6f", step, sample.id, breakdown.total)
        if out_dir is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            save_checkpoint(out_dir / f"ckpt_{step:06d}.wven", Checkpoint.from_training(step, cfg.model, params, adam))

    ckpt = Checkpoint.from_training(cfg.steps, cfg.model, params, adam)
    report = evaluate(params, eval_samples if eval_samples else samples, cfg.model)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out_dir / "checkpoint.wven", ckpt)
        write_loss_log(out_dir / "train_log.csv", losses)
        report.write_csv(out_dir / "metrics.csv")
        (out_dir / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    return TrainResult(ckpt, losses, report, out_dir)


def train(cfg: TrainConfig, out_dir=None) -> TrainResult:
    """Train from the PNG directories named in ``cfg``; evaluation uses the val split if present."""
    train_src, val_src = load_dataset(cfg.input_dir, cfg.target_dir, cfg.manifest or None)
    samples = [s.load() for s in train_src]
    eval_samples = [s.load() for s in val_src] or samples
    return train_samples(cfg, samples, eval_samples, out_dir if out_dir is not None else cfg.out_dir)


def write_loss_log(path, losses: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for row in losses:
            writer.writerow([row["step"], row["id"]] + [repr(float(row[c])) for c in LOG_COLUMNS[2:]])
