"""Paired PNG datasets and training-time augmentation."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

# Rec.601 luma weights for the saturation jitter
_LUMA = np.array([0.299, 0.587, 0.114])


class DatasetError(ValueError):
    pass


@dataclass
class AugmentRecord:
    crop_origin: tuple[int, int] = (0, 0)
    crop_size: int | None = None
    flipped: bool = False
    brightness: float = 1.0
    saturation: float = 1.0


@dataclass
class PairedSample:
    """Input/target pair as (1, 3, H, W) float arrays in [0, 1]."""

    input: np.ndarray
    target: np.ndarray
    id: str
    record: AugmentRecord = field(default_factory=AugmentRecord)

    def __post_init__(self):
        if self.input.shape != self.target.shape:
            raise DatasetError(f"{self.id}: input {self.input.shape} and target {self.target.shape} differ")


@dataclass(frozen=True)
class PairSource:
    id: str
    input_path: Path
    target_path: Path

    def load(self, dtype=np.float32) -> PairedSample:
        return PairedSample(read_png(self.input_path, dtype), read_png(self.target_path, dtype), self.id)


def read_png(path, dtype=np.float32) -> np.ndarray:
    """Decode an 8-bit RGB PNG to a (1, 3, H, W) array scaled by 1/255."""
    path = Path(path)
    with Image.open(path) as img:
        if img.format != "PNG":
            raise DatasetError(f"{path}: not a PNG file")
        if img.mode != "RGB":
            raise DatasetError(f"{path}: expected 8-bit RGB, got mode {img.mode!r}")
        arr = np.asarray(img, dtype=np.uint8)
    return (arr.astype(dtype) / dtype(255.0)).transpose(2, 0, 1)[None].copy()


def to_uint8(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 4:
        arr = arr[0]
    return np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def write_png(path, image: np.ndarray) -> None:
    """Write a (1, 3, H, W) or (3, H, W) image in [0, 1]; the target only appears once complete."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            Image.fromarray(to_uint8(image), mode="RGB").save(fh, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path) -> dict[str, str]:
    """``<filename> <split>`` lines (split is train or val); ``#`` starts a comment."""
    splits: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("train", "val"):
            raise DatasetError(f"{path}:{lineno}: expected '<filename> train|val', got {raw!r}")
        splits[parts[0]] = parts[1]
    return splits


def load_dataset(input_dir, target_dir, manifest=None) -> tuple[list[PairSource], list[PairSource]]:
    """Match PNGs by filename and split them into (train, val) lists sorted by name.

    Without a manifest every pair is a training pair.
    """
    input_dir, target_dir = Path(input_dir), Path(target_dir)
    inputs = {p.name for p in input_dir.glob("*.png")}
    targets = {p.name for p in target_dir.glob("*.png")}
    missing = sorted(inputs ^ targets)
    if missing:
        where = ["target" if name in inputs else "input" for name in missing]
        detail = ", ".join(f"{name} (no {w})" for name, w in zip(missing, where))
        raise DatasetError(f"unmatched files: {detail}")
    if not inputs:
        raise DatasetError(f"no PNG files in {input_dir}")
    splits = read_manifest(manifest) if manifest else {name: "train" for name in inputs}
    unknown = sorted(set(splits) - inputs)
    if unknown:
        raise DatasetError(f"manifest lists files that do not exist: {', '.join(unknown)}")
    train, val = [], []
    for name in sorted(splits):
        src = PairSource(Path(name).stem, input_dir / name, target_dir / name)
        (train if splits[name] == "train" else val).append(src)
    return train, val


def adjust_saturation(image: np.ndarray, factor: float) -> np.ndarray:
    gray = np.tensordot(_LUMA.astype(image.dtype), image, axes=([0], [1]))[:, None]
    return np.clip(gray + factor * (image - gray), 0.0, 1.0)


def augment_pair(sample: PairedSample, rng: np.random.Generator, crop: int, *,
                 flip: bool = True, brightness: float = 0.1, saturation: float = 0.1) -> PairedSample:
    """Shared random crop and horizontal flip; brightness/saturation jitter on the input only.

    Jitter factors are drawn from Uniform[1 - amp, 1 + amp]; an amplitude of
    0 disables that jitter.
    """
    _, _, h, w = sample.input.shape
    if crop > min(h, w):
        raise DatasetError(f"{sample.id}: crop {crop} larger than image {h}x{w}")
    if crop % 16:
        raise DatasetError(f"crop must be divisible by 16, got {crop}")
    top = int(rng.integers(0, h - crop + 1))
    left = int(rng.integers(0, w - crop + 1))
    flipped = bool(rng.random() < 0.5) if flip else False
    u = float(rng.uniform(1.0 - brightness, 1.0 + brightness)) if brightness else 1.0
    v = float(rng.uniform(1.0 - saturation, 1.0 + saturation)) if saturation else 1.0

    window = (slice(None), slice(None), slice(top, top + crop), slice(left, left + crop))
    inp = sample.input[window]
    tgt = sample.target[window]
    if flipped:
        inp = inp[..., ::-1]
        tgt = tgt[..., ::-1]
    inp = np.ascontiguousarray(inp)
    tgt = np.ascontiguousarray(tgt)
    if u != 1.0:
        inp = np.clip(inp * inp.dtype.type(u), 0.0, 1.0)
    if v != 1.0:
        inp = adjust_saturation(inp, inp.dtype.type(v))
    record = AugmentRecord((top, left), crop, flipped, u, v)
    return replace(sample, input=inp.astype(sample.input.dtype, copy=False),
                   target=tgt, record=record)


def hflip(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image[..., ::-1])
