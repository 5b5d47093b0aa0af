"""Toy 3D latent codec: first frame as its own block, temporal grouping,
spatial mean pooling, and a fixed orthonormal channel lift.

A (T, H, W, 3) video maps to (t, h, w, c) with t = 1 + (T−1)/f_t,
h = H/f_s, w = W/f_s. Block 1 derives from frame 1 alone; block i (i ≥ 2)
derives from frames (i−2)·f_t+2 .. (i−1)·f_t+1 (1-based, inclusive). The
channel lift is a seeded c×3 matrix with orthonormal columns, so decoding
inverts it exactly and codec fidelity is just the pooling projection.

Block indices are 1-based throughout this package (block 1 is the anchor).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import FLOAT, Rng, SUB_PARAMS, as_f32


@dataclass(frozen=True)
class CodecConfig:
    f_s: int = 4          # spatial pooling factor
    f_t: int = 4          # frames per non-anchor block
    c: int = 4            # latent channels, >= 3 for an exact lift inverse
    lift_seed: int = 0x11F7

    def __post_init__(self):
        if self.f_s < 1 or self.f_t < 1:
            raise ValueError(f"factors must be >= 1, got f_s={self.f_s} f_t={self.f_t}")
        if self.c < 3:
            raise ValueError(f"latent channels must be >= 3, got {self.c}")


@lru_cache(maxsize=None)
def channel_lift(cfg: CodecConfig) -> np.ndarray:
    """Seeded (c, 3) matrix with orthonormal columns; left inverse is its transpose."""
    g = Rng(cfg.lift_seed).split(SUB_PARAMS)
    m = g.normal((cfg.c, 3)).astype(np.float64)
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))  # fix the sign convention so the lift is seed-stable
    return q.astype(FLOAT)


def num_blocks(T: int, f_t: int) -> int:
    if T < 1:
        raise ValueError(f"frame count must be >= 1, got {T}")
    if (T - 1) % f_t:
        raise ValueError(f"(T-1)={T - 1} not divisible by f_t={f_t}")
    return 1 + (T - 1) // f_t


def frames_for_block(i: int, f_t: int) -> tuple[int, int]:
    """Inclusive 1-based frame range covered by block i (i is 1-based)."""
    if i < 1:
        raise ValueError(f"block index must be >= 1, got {i}")
    if i == 1:
        return (1, 1)
    return ((i - 2) * f_t + 2, (i - 1) * f_t + 1)


def latent_shape(T: int, H: int, W: int, cfg: CodecConfig) -> tuple[int, int, int, int]:
    if H % cfg.f_s or W % cfg.f_s:
        raise ValueError(f"{H}x{W} not divisible by f_s={cfg.f_s}")
    return (num_blocks(T, cfg.f_t), H // cfg.f_s, W // cfg.f_s, cfg.c)


def _pool_spatial(frames: np.ndarray, f_s: int) -> np.ndarray:
    n, h, w, c = frames.shape
    return frames.reshape(n, h // f_s, f_s, w // f_s, f_s, c).mean(axis=(2, 4), dtype=FLOAT)


def encode(video: np.ndarray, cfg: CodecConfig) -> np.ndarray:
    """Encode a (T, H, W, 3) video to (t, h, w, c) latents."""
    v = as_f32(video, "video")
    if v.ndim != 4 or v.shape[3] != 3:
        raise ValueError(f"expected (T,H,W,3) video, got shape {v.shape}")
    T, H, W, _ = v.shape
    t, h, w, c = latent_shape(T, H, W, cfg)
    lift = channel_lift(cfg)
    out = np.empty((t, h, w, c), dtype=FLOAT)
    out[0] = _pool_spatial(v[:1], cfg.f_s)[0] @ lift.T
    for i in range(2, t + 1):
        lo, hi = frames_for_block(i, cfg.f_t)
        group = v[lo - 1:hi].mean(axis=0, dtype=FLOAT, keepdims=True)
        out[i - 1] = _pool_spatial(group, cfg.f_s)[0] @ lift.T
    return out


def decode_block(block: np.ndarray, cfg: CodecConfig, first: bool) -> np.ndarray:
    """Decode one (h, w, c) latent block to its frames (1 or f_t of them)."""
    lift = channel_lift(cfg)
    rgb = block @ lift  # exact left inverse of the lift
    up = np.repeat(np.repeat(rgb, cfg.f_s, axis=0), cfg.f_s, axis=1)
    frames = up[None] if first else np.broadcast_to(up, (cfg.f_t,) + up.shape)
    return np.clip(frames, 0.0, 1.0).astype(FLOAT)


def decode(latent: np.ndarray, cfg: CodecConfig) -> np.ndarray:
    """Decode (t, h, w, c) latents to a (T, H, W, 3) video clamped to [0, 1]."""
    z = as_f32(latent, "latent")
    if z.ndim != 4:
        raise ValueError(f"expected (t,h,w,c) latent, got shape {z.shape}")
    if z.shape[3] != cfg.c:
        raise ValueError(f"latent has {z.shape[3]} channels, config expects {cfg.c}")
    t = z.shape[0]
    parts = [decode_block(z[i - 1], cfg, first=(i == 1)) for i in range(1, t + 1)]
    return np.concatenate(parts, axis=0)
