"""Stage II input construction.

Three pieces: the hybrid pixel reference (upsampled low-resolution video
with frame 1 swapped for the true input image), latent anchoring (the first
noisy block replaced by the encoded input image), and channel concatenation
of the noisy and reference latent streams into the (t, h, w, 2c) tensor the
denoiser consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import CodecConfig, encode
from .grid import as_f32, resize_spatial


@dataclass(frozen=True)
class StageTwoInput:
    z_ref: np.ndarray   # (t, h, w, c) hybrid reference latents
    z_x: np.ndarray     # (h, w, c) anchor latent of the input image

    def __post_init__(self):
        if self.z_ref.ndim != 4 or self.z_x.ndim != 3:
            raise ValueError("z_ref must be (t,h,w,c) and z_x (h,w,c)")
        if self.z_ref.shape[1:] != self.z_x.shape:
            raise ValueError(f"block shape mismatch {self.z_ref.shape[1:]} vs {self.z_x.shape}")


def build_hybrid_reference(v_lr: np.ndarray, x: np.ndarray, factor: int) -> np.ndarray:
    """Nearest-upsample the LR video and replace frame 1 with the input image."""
    v = as_f32(v_lr, "v_lr")
    xf = as_f32(x, "x")
    if v.ndim != 4 or xf.ndim != 3:
        raise ValueError("v_lr must be (T,H,W,C), x a single (H,W,C) frame")
    up = resize_spatial(v, "up_nearest", factor)
    if up.shape[1:] != xf.shape:
        raise ValueError(f"upsampled frames {up.shape[1:]} do not match input frame {xf.shape}")
    out = up.copy()
    out[0] = xf
    return out


def build_stage2_input(v_ref: np.ndarray, x: np.ndarray, cfg: CodecConfig) -> StageTwoInput:
    """Encode the hybrid reference and the input image into latent conditioning."""
    z_ref = encode(v_ref, cfg)
    z_x = encode(as_f32(x, "x")[None], cfg)[0]
    return StageTwoInput(z_ref=z_ref, z_x=z_x)


def assemble_input(z_noisy: np.ndarray, z_ref: np.ndarray, z_x: np.ndarray) -> np.ndarray:
    """Anchor the noisy stream and concatenate the reference along channels.

    Returns a fresh (t, h, w, 2c) tensor; z_noisy is not mutated. The first
    c channels of block 1 are z_x; blocks 2..t pass through unchanged.
    """
    if z_noisy.shape != z_ref.shape:
        raise ValueError(f"noisy/reference shape mismatch {z_noisy.shape} vs {z_ref.shape}")
    if z_x.shape != z_noisy.shape[1:]:
        raise ValueError(f"anchor shape {z_x.shape} does not match blocks {z_noisy.shape[1:]}")
    anchored = z_noisy.copy()
    anchored[0] = z_x
    return np.concatenate([anchored, z_ref], axis=-1)
