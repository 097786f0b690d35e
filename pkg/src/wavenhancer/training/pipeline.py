"""Model construction and the full forward pass: DWT, two stages, IDWT, refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..dpr import dpr_forward, init_dpr
from ..gsr import gsr_forward, init_gsr
from ..hfr import hfr_forward, init_hfr, init_unet, unet_forward
from ..nn import Params
from ..tensorad import Tensor
from ..wavelet import WaveletBands, dwt2, idwt2
from .config import ModelConfig


@dataclass
class PipelineOutput:
    final: Tensor
    ll_enh: Tensor
    hf_enh: Tensor
    intermediate: Tensor
    bands: WaveletBands


def init_model(cfg: ModelConfig, dtype=np.float32) -> Params:
    params: Params = {}
    if cfg.stage1 == "gsr":
        params.update(init_gsr(cfg.gsr, dtype, "gsr"))
    else:
        params.update(init_unet(cfg.unet1, "unet1", dtype))
    params.update(init_hfr(cfg.hfr, dtype, "hfr"))
    if cfg.stage2 == "dpr":
        params.update(init_dpr(cfg.dpr, dtype, "dpr"))
    else:
        params.update(init_unet(cfg.unet2, "unet2", dtype))
    return params


def forward_pipeline(image: Tensor, params: Params, cfg: ModelConfig) -> PipelineOutput:
    """Enhance an (N, 3, H, W) image; H and W must be divisible by ``cfg.multiple``."""
    if image.ndim != 4 or image.shape[1] != 3:
        raise ValueError(f"expected an (N, 3, H, W) image, got {image.shape}")
    nn.check_multiple(image.shape, cfg.multiple, "pipeline input")
    bands = dwt2(image)
    if cfg.stage1 == "gsr":
        ll = gsr_forward(bands.ll, params, cfg.gsr, "gsr")
    else:
        ll = unet_forward(bands.ll, params, cfg.unet1, "unet1")
    hf = hfr_forward(bands.high, params, cfg.hfr, "hfr")
    intermediate = idwt2(WaveletBands.from_high(ll, hf, bands.padded))
    if cfg.stage2 == "dpr":
        final = dpr_forward(intermediate, params, cfg.dpr, "dpr")
    else:
        final = unet_forward(intermediate, params, cfg.unet2, "unet2")
    return PipelineOutput(final, ll, hf, intermediate, bands)
