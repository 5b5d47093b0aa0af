"""Dense float32 tensors, seeded randomness, and the SIV1 on-disk container.

Every array that crosses a module boundary in this package is a row-major
float32 numpy array with finite entries. Pixel videos are (T, H, W, C) with
values in [0, 1]; latent videos are (t, h, w, c). This module owns the three
shared primitives: the deterministic RNG, spatial resizing, and file I/O.

Reproducibility contract: ``Rng`` wraps numpy's PCG64 bit generator seeded
through ``SeedSequence``. The same 64-bit seed yields the same value stream
on every run and platform (for a fixed numpy major version). Sub-streams are
derived with ``split``, which feeds a tuple of integer keys into
``SeedSequence(spawn_key=...)``; the key constants below are fixed and part
of the format of any seeded artifact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FLOAT = np.float32

SIV1_MAGIC = b"SIV1"
_HEADER = struct.Struct("<4sIIIII")  # magic, T, H, W, C, reserved

# Named sub-stream keys (first element of every split key tuple).
SUB_INIT_NOISE = 0xA1  # per-block initial latent noise, key (SUB_INIT_NOISE, block)
SUB_TRAIN = 0xB2       # training-step draws, key (SUB_TRAIN, step)
SUB_TRANSITION = 0xC3  # transition-pair corruption, key (SUB_TRANSITION, pair)
SUB_PARAMS = 0xD4      # parameter initialization
SUB_SCENE = 0xE5       # synthetic scene content

_MAX_ELEMENTS = 1 << 31  # refuse absurd allocations up front


class Rng:
    """Deterministic random stream with keyed sub-streams.

    ``Rng(seed)`` is the root stream; ``rng.split(*keys)`` derives an
    independent child stream identified by the integer key path. Streams are
    single-owner: never share one instance across concurrent contexts.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        if not isinstance(seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must fit in u64, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in _key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=self.key))
        )

    def split(self, *keys: int) -> "Rng":
        """Child stream for the given key path, independent of this one."""
        return Rng(self.seed, self.key + keys)

    def normal(self, shape: tuple[int, ...]) -> np.ndarray:
        return self._gen.standard_normal(shape, dtype=FLOAT)

    def uniform01(self) -> float:
        """One double in [0, 1)."""
        return float(self._gen.random())

    def integers(self, low: int, high: int) -> int:
        """One integer in [low, high)."""
        return int(self._gen.integers(low, high))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Rng(seed={self.seed}, key={self.key})"


def _check_dims(dims: tuple[int, ...]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0:
        raise ValueError("dims must be non-empty")
    if any(d <= 0 for d in dims):
        raise ValueError(f"all extents must be positive, got {dims}")
    n = 1
    for d in dims:
        n *= d
    if n > _MAX_ELEMENTS:
        raise ValueError(f"tensor of {n} elements exceeds the {_MAX_ELEMENTS} cap")
    return dims


def require_finite(arr: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_f32(arr, name: str = "tensor") -> np.ndarray:
    """Coerce to a finite float32 array (no copy when already one)."""
    out = np.asarray(arr, dtype=FLOAT)
    require_finite(out, name)
    return out


def gaussian_fill(rng: Rng, dims: tuple[int, ...]) -> np.ndarray:
    """I.i.d. standard-normal float32 tensor, reproducible per stream."""
    return rng.normal(_check_dims(dims))


def init_noise_blocks(rng: Rng, t: int, h: int, w: int, c: int) -> np.ndarray:
    """Initial latents: blocks 2..t from per-block noise sub-streams, block 1
    zeroed (the caller installs the anchor there). Keying by block index means
    any windowed traversal of the same stream sees identical noise per block,
    which is what makes the windowed, full-sequence, and streaming denoise
    paths comparable bit for bit."""
    z = np.zeros(_check_dims((t, h, w, c)), FLOAT)
    for i in range(2, t + 1):
        z[i - 1] = rng.split(SUB_INIT_NOISE, i).normal((h, w, c))
    return z


def resize_spatial(video: np.ndarray, mode: str, factor: int) -> np.ndarray:
    """Spatial resize of a (T, H, W, C) pixel video.

    ``down_avg`` takes non-overlapping factor×factor block means (H and W must
    be divisible by factor); ``up_nearest`` replicates each pixel factor×factor.
    Values stay in [0, 1] for inputs in [0, 1].
    """
    v = as_f32(video, "video")
    if v.ndim != 4:
        raise ValueError(f"expected (T,H,W,C) video, got shape {v.shape}")
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return v.copy()
    t, h, w, c = v.shape
    if mode == "down_avg":
        if h % factor or w % factor:
            raise ValueError(f"extents {h}x{w} not divisible by factor {factor}")
        blocks = v.reshape(t, h // factor, factor, w // factor, factor, c)
        return blocks.mean(axis=(2, 4), dtype=FLOAT)
    if mode == "up_nearest":
        return np.repeat(np.repeat(v, factor, axis=1), factor, axis=2)
    raise ValueError(f"unknown resize mode {mode!r}")


def write_siv1(path, arr: np.ndarray) -> None:
    """Write a 4-D float32 tensor as an SIV1 file.

    Layout: magic ``SIV1``, five little-endian u32 (the four extents and a
    zero reserved word), then the row-major little-endian float32 payload.
    The same container stores pixel videos (T,H,W,C) and latents (t,h,w,c).
    """
    a = as_f32(arr, "tensor")
    if a.ndim != 4:
        raise ValueError(f"SIV1 stores 4-D tensors, got shape {a.shape}")
    _check_dims(a.shape)
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(SIV1_MAGIC, *a.shape, 0))
        f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def read_siv1(path) -> np.ndarray:
    """Read an SIV1 file back into a (d0, d1, d2, d3) float32 array."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated SIV1 header")
    magic, d0, d1, d2, d3, reserved = _HEADER.unpack_from(raw)
    if magic != SIV1_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if reserved != 0:
        raise ValueError(f"{path}: nonzero reserved word {reserved}")
    dims = _check_dims((d0, d1, d2, d3))
    n = d0 * d1 * d2 * d3
    payload = raw[_HEADER.size:]
    if len(payload) != 4 * n:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, expected {4 * n}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(FLOAT, copy=True)
    require_finite(arr, str(path))
    return arr
