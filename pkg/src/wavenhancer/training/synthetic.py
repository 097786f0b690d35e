"""Synthetic paired data: smooth random scenes and a fixed colour-grading target."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import write_png

WB_GAINS = (1.08, 1.0, 0.88)
GAMMA = 0.8


def random_scene(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """(1, 3, size, size) image built from gradients, soft blobs and a few hard edges."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    img = np.empty((3, size, size))
    for c in range(3):
        a, b, base = rng.uniform(-0.4, 0.4, size=3)
        img[c] = 0.45 + base * 0.5 + a * (xx - 0.5) + b * (yy - 0.5)
    for _ in range(4):
        cy, cx = rng.uniform(0, 1, size=2)
        r = rng.uniform(0.08, 0.25)
        color = rng.uniform(-0.3, 0.3, size=3)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        img += color[:, None, None] * blob
    for _ in range(2):
        y0, x0 = rng.integers(0, size // 2, size=2)
        h, w = rng.integers(size // 8, size // 2, size=2)
        img[:, y0:y0 + h, x0:x0 + w] += rng.uniform(-0.15, 0.15, size=3)[:, None, None]
    img += rng.normal(0.0, 0.01, size=img.shape)
    return np.clip(img, 0.02, 0.98)[None]


def grade(image: np.ndarray, gains=WB_GAINS, gamma: float = GAMMA) -> np.ndarray:
    """White-balance gains followed by a power-law tone curve."""
    balanced = np.clip(image * np.asarray(gains).reshape(1, 3, 1, 1), 0.0, 1.0)
    return balanced ** gamma


def write_pairs(root, count: int = 4, size: int = 64, seed: int = 0, val: int = 0) -> Path:
    """Write ``input/``, ``target/`` and ``manifest.txt`` under ``root``; returns ``root``."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(count):
        scene = random_scene(rng, size)
        name = f"pair{i:03d}.png"
        write_png(root / "input" / name, scene)
        write_png(root / "target" / name, grade(scene))
        lines.append(f"{name} {'val' if i >= count - val else 'train'}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root
