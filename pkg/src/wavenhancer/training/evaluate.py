"""Metric tables over a dataset: PSNR, SSIM and Delta E per image plus means."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import colorm
from ..nn import Params
from ..tensorad import Tensor
from .checkpoint import Checkpoint
from .config import ModelConfig
from .data import PairSource
from .pipeline import forward_pipeline

METRIC_COLUMNS = ("psnr_db", "ssim", "delta_e")
CSV_HEADER = ("id",) + METRIC_COLUMNS


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def means(self) -> dict[str, float]:
        return {col: float(np.mean([r[col] for r in self.rows])) for col in METRIC_COLUMNS}

    def to_csv(self, include_mean: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r["id"]] + [_fmt(r[c]) for c in METRIC_COLUMNS])
        if include_mean and self.rows:
            means = self.means
            writer.writerow(["mean"] + [_fmt(means[c]) for c in METRIC_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def quantize(image: np.ndarray) -> np.ndarray:
    """Round to the 8-bit grid a saved PNG would hold."""
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0) / 255.0


def enhance_array(image: np.ndarray, params: Params, cfg: ModelConfig) -> np.ndarray:
    """Run the model on a (1, 3, H, W) array of any size; returns the clamped output."""
    _, _, h, w = image.shape
    m = max(cfg.multiple, 16)
    ph, pw = -h % m, -w % m
    x = image
    if ph or pw:
        x = np.pad(image, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="reflect" if min(h, w) > max(ph, pw) else "symmetric")
    dtype = next(iter(params.values())).dtype
    out = forward_pipeline(Tensor(x.astype(dtype), dtype=dtype), params, cfg).final.data
    return np.clip(out[:, :, :h, :w], 0.0, 1.0)


def score(output: np.ndarray, target: np.ndarray) -> dict[str, float]:
    return {
        "psnr_db": colorm.psnr(output, target),
        "ssim": colorm.ssim(output, target),
        "delta_e": colorm.delta_e(output, target),
    }


def evaluate(model, samples, cfg: ModelConfig | None = None, quantize_output: bool = True) -> EvalReport:
    """Score ``model`` (a Checkpoint, or a params dict with ``cfg``) on paired samples.

    ``samples`` may hold :class:`PairSource` or :class:`PairedSample` items.
    Outputs are clamped and, by default, rounded to 8 bits as a saved PNG
    would be, then compared against the targets in 64-bit.
    """
    if isinstance(model, Checkpoint):
        ckpt_cfg = model.model_config
        if cfg is not None and ckpt_cfg.diff(cfg):
            from .checkpoint import ConfigMismatchError
            raise ConfigMismatchError(ckpt_cfg.diff(cfg))
        cfg = ckpt_cfg
        params = model.params()
    else:
        if cfg is None:
            raise ValueError("evaluate needs a ModelConfig when given raw parameters")
        params = model
    report = EvalReport()
    for item in samples:
        sample = item.load() if isinstance(item, PairSource) else item
        out = enhance_array(sample.input, params, cfg)
        if quantize_output:
            out = quantize(out)
        row = {"id": sample.id}
        row.update(score(out.astype(np.float64), sample.target.astype(np.float64)))
        report.rows.append(row)
    return report
