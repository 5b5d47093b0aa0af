"""Toy windowed denoiser: per-block linear embedding, one head of scaled
dot-product attention across the blocks of a window (bidirectional or causal
mask), residual connection, linear readout to a velocity prediction.

The model predicts the rectified-flow velocity v = eps - x0 on the linear
path x_sigma = (1-sigma)*x0 + sigma*eps, and the sampler takes Euler steps
z <- z + (sigma_to - sigma_from) * v_hat. Gradients are hand-derived; the
whole module is dtype-generic so tests can run the same code in float64 for
finite-difference checks while the pipeline stays float32.

Conditioning enters additively: a fixed sinusoidal code of the noise level
and a fixed sinusoidal positional code of each block's absolute temporal
index (windows are non-contiguous, so window-relative positions would alias).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .grid import FLOAT, Rng, read_siv1, require_finite, write_siv1

MASK_MODES = ("bidirectional", "causal")

forward_calls = 0  # running count of forward passes; benchmarks read the delta


@dataclass
class MixerParams:
    w_in: np.ndarray    # (d_in, d)
    w_q: np.ndarray     # (d, d)
    w_k: np.ndarray     # (d, d)
    w_v: np.ndarray     # (d, d)
    w_out: np.ndarray   # (d, d_out)
    d: int
    mask_mode: str

    @property
    def d_in(self) -> int:
        return self.w_in.shape[0]

    @property
    def d_out(self) -> int:
        return self.w_out.shape[1]

    def check(self):
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"mask_mode must be one of {MASK_MODES}, got {self.mask_mode!r}")
        d = self.d
        if self.w_in.shape[1] != d or self.w_out.shape[0] != d:
            raise ValueError("embedding/readout width disagrees with d")
        for name in ("w_q", "w_k", "w_v"):
            if getattr(self, name).shape != (d, d):
                raise ValueError(f"{name} must be ({d},{d})")
        for name in ("w_in", "w_q", "w_k", "w_v", "w_out"):
            require_finite(getattr(self, name), name)

    def copy(self) -> "MixerParams":
        return replace(self, w_in=self.w_in.copy(), w_q=self.w_q.copy(),
                       w_k=self.w_k.copy(), w_v=self.w_v.copy(), w_out=self.w_out.copy())

    def astype(self, dtype) -> "MixerParams":
        return replace(self, w_in=self.w_in.astype(dtype), w_q=self.w_q.astype(dtype),
                       w_k=self.w_k.astype(dtype), w_v=self.w_v.astype(dtype),
                       w_out=self.w_out.astype(dtype))


_MATS = ("w_in", "w_q", "w_k", "w_v", "w_out")


def init_mixer(rng: Rng, d_in: int, d_out: int, d: int = 32,
               mask_mode: str = "bidirectional",
               zero_rows: np.ndarray | None = None) -> MixerParams:
    """Random small init, N(0, 1/fan_in). `zero_rows` zeroes the named rows of
    w_in so the corresponding input channels start inert (see conditioning)."""
    if d % 2:
        raise ValueError(f"hidden width must be even for the sinusoid codes, got {d}")
    mats = {}
    for name, shape in (("w_in", (d_in, d)), ("w_q", (d, d)), ("w_k", (d, d)),
                        ("w_v", (d, d)), ("w_out", (d, d_out))):
        g = rng.split(ord(name[2]), shape[0], shape[1])
        mats[name] = g.normal(shape) / np.sqrt(FLOAT(shape[0]))
    if zero_rows is not None:
        mats["w_in"][np.asarray(zero_rows)] = 0.0
    p = MixerParams(d=d, mask_mode=mask_mode, **mats)
    p.check()
    return p


def zero_mixer(d_in: int, d_out: int, d: int = 32, mask_mode: str = "bidirectional") -> MixerParams:
    """All-zero parameters: predicts v_hat = 0, a null model for plumbing tests."""
    return MixerParams(
        w_in=np.zeros((d_in, d), FLOAT), w_q=np.zeros((d, d), FLOAT),
        w_k=np.zeros((d, d), FLOAT), w_v=np.zeros((d, d), FLOAT),
        w_out=np.zeros((d, d_out), FLOAT), d=d, mask_mode=mask_mode)


def ref_rows(h: int, w: int, c: int) -> np.ndarray:
    """Rows of w_in fed by the reference half under denoise_window's packing
    (per-pixel channel layout [noisy c | reference c])."""
    base = np.arange(h * w) * (2 * c)
    return (base[:, None] + np.arange(c, 2 * c)[None, :]).ravel()


def sin_code(x: float, d: int, dtype=FLOAT) -> np.ndarray:
    """Fixed sinusoidal code of a scalar, standard geometric frequency ladder."""
    half = d // 2
    freqs = 10000.0 ** (-np.arange(half, dtype=np.float64) / half)
    ang = float(x) * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)]).astype(dtype)


def _embed(p: MixerParams, x: np.ndarray, sigma: float, indices) -> np.ndarray:
    n = x.shape[0]
    if indices is None:
        indices = range(1, n + 1)
    dt = p.w_in.dtype
    h = x @ p.w_in
    h = h + sin_code(1000.0 * sigma, p.d, dt)[None, :]
    pos = np.stack([sin_code(float(i), p.d, dt) for i in indices], axis=0)
    return h + pos


def _attend(p: MixerParams, h: np.ndarray):
    n = h.shape[0]
    dt = h.dtype
    q, k, v = h @ p.w_q, h @ p.w_k, h @ p.w_v
    scale = dt.type(1.0) / np.sqrt(dt.type(p.d))
    logits = (q @ k.T) * scale
    if p.mask_mode == "causal":
        keep = np.tril(np.ones((n, n), dtype=bool))
        logits = np.where(keep, logits, dt.type(-np.inf))
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    attn = e / e.sum(axis=1, keepdims=True)
    return q, k, v, attn, scale


def _forward_cache(p: MixerParams, window_blocks: np.ndarray, sigma: float, indices):
    x = np.asarray(window_blocks, dtype=p.w_in.dtype)
    if x.ndim != 2 or x.shape[1] != p.d_in:
        raise ValueError(f"window blocks must be (n, {p.d_in}), got {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("window must contain at least one block")
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0,1], got {sigma}")
    h = _embed(p, x, sigma, indices)
    q, k, v, attn, scale = _attend(p, h)
    r = h + attn @ v
    y = r @ p.w_out
    return y, (x, h, q, k, v, attn, scale, r)


def forward(p: MixerParams, window_blocks: np.ndarray, sigma: float,
            indices=None) -> np.ndarray:
    """Velocity predictions, one (d_out,) row per window block.

    `indices` are the blocks' absolute 1-based temporal positions; defaults
    to 1..n for tests that do not care.
    """
    global forward_calls
    forward_calls += 1
    y, _ = _forward_cache(p, window_blocks, sigma, indices)
    return y


def loss_and_grad(p: MixerParams, window_blocks: np.ndarray, clean_targets: np.ndarray,
                  noisy_mask: np.ndarray, sigma: float, eps: np.ndarray,
                  indices=None):
    """Masked flow-matching loss and analytic parameter gradients.

    loss = mean over noisy blocks of ||v_hat - (eps - x0)||^2. Blocks with
    noisy_mask False are teacher-forced conditioning; their loss rows are
    dropped, so their terms contribute exactly zero gradient.
    """
    mask = np.asarray(noisy_mask, dtype=bool)
    if not mask.any():
        raise ValueError("noisy_mask selects no blocks; loss undefined")
    y, (x, h, q, k, v, attn, scale, r) = _forward_cache(p, window_blocks, sigma, indices)
    dt = y.dtype
    tgt = np.asarray(eps, dt) - np.asarray(clean_targets, dt)
    n_noisy = int(mask.sum())

    resid = np.where(mask[:, None], y - tgt, dt.type(0.0))
    loss = float((resid * resid).sum()) / n_noisy

    d_y = (dt.type(2.0) / dt.type(n_noisy)) * resid
    g_out = r.T @ d_y
    d_r = d_y @ p.w_out.T
    d_h = d_r.copy()                      # residual branch
    d_attn = d_r @ v.T
    g_v_in = attn.T @ d_r                 # grad wrt v rows
    d_logits = attn * (d_attn - (d_attn * attn).sum(axis=1, keepdims=True))
    d_q = (d_logits @ k) * scale
    d_k = (d_logits.T @ q) * scale
    d_h += d_q @ p.w_q.T + d_k @ p.w_k.T + g_v_in @ p.w_v.T
    grads = {
        "w_out": g_out,
        "w_q": h.T @ d_q,
        "w_k": h.T @ d_k,
        "w_v": h.T @ g_v_in,
        "w_in": x.T @ d_h,
    }
    return loss, grads


def sgd_update(p: MixerParams, grads: dict, lr: float = 1e-2) -> None:
    """Plain gradient descent, in place."""
    for name in _MATS:
        m = getattr(p, name)
        m -= m.dtype.type(lr) * grads[name].astype(m.dtype)


@dataclass(frozen=True)
class SigmaSchedule:
    sigmas: tuple[float, ...]

    def __post_init__(self):
        s = self.sigmas
        if len(s) < 2 or s[0] != 1.0 or s[-1] != 0.0:
            raise ValueError(f"schedule must run 1.0 -> 0.0, got {s}")
        if any(b >= a for a, b in zip(s, s[1:])):
            raise ValueError(f"schedule must be strictly decreasing, got {s}")

    @property
    def K(self) -> int:
        return len(self.sigmas) - 1


def default_schedule(K: int = 4) -> SigmaSchedule:
    if K < 1:
        raise ValueError(f"need at least one step, got K={K}")
    return SigmaSchedule(tuple(1.0 - j / K for j in range(K)) + (0.0,))


def uniform_sigmas(start: float, steps: int) -> list[float]:
    """Truncated uniform ladder start -> 0 for partial denoising."""
    if not 0.0 < start <= 1.0:
        raise ValueError(f"start must lie in (0,1], got {start}")
    if steps < 1:
        raise ValueError(f"need steps >= 1, got {steps}")
    return [start * (1.0 - j / steps) for j in range(steps)] + [0.0]


def sampler_step(z: np.ndarray, v_hat: np.ndarray, sigma_from: float, sigma_to: float) -> np.ndarray:
    """One Euler step along the linear path: z + (sigma_to - sigma_from) * v_hat."""
    if sigma_to >= sigma_from:
        raise ValueError(f"need sigma_to < sigma_from, got {sigma_from} -> {sigma_to}")
    if z.shape != v_hat.shape:
        raise ValueError(f"shape mismatch {z.shape} vs {v_hat.shape}")
    return z + (sigma_to - sigma_from) * v_hat


def denoise_window(p: MixerParams, sigmas, z_window: np.ndarray, ref_window: np.ndarray,
                   update_mask: np.ndarray, indices, on_step=None) -> np.ndarray:
    """Run the sigma ladder on one window of blocks.

    z_window, ref_window: (n, h, w, c). Each step concatenates ref channels,
    predicts velocities for every block, and applies the Euler update only
    where update_mask is True (conditioning blocks pass through untouched).
    Every denoising path in the package funnels through here, which is what
    makes the sequential / streaming / single-window variants bit-identical.

    on_step(k, z, idx), if given, observes the window after each step.
    """
    z = z_window.copy()
    n, h, w, c = z.shape
    idx = tuple(indices)
    upd = np.asarray(update_mask, dtype=bool)
    for k, (sigma_from, sigma_to) in enumerate(zip(sigmas, sigmas[1:])):
        x = np.concatenate([z, ref_window], axis=-1).reshape(n, -1)
        v_hat = forward(p, x, sigma_from, idx).reshape(n, h, w, c)
        stepped = sampler_step(z, v_hat, sigma_from, sigma_to)
        z[upd] = stepped[upd]
        if on_step is not None:
            on_step(k, z, idx)
    return z


def save_params(p: MixerParams, out_dir: str) -> None:
    """Matrices as 4D single-channel tensors plus a JSON sidecar."""
    p.check()
    os.makedirs(out_dir, exist_ok=True)
    for name in _MATS:
        m = getattr(p, name).astype(FLOAT)
        write_siv1(os.path.join(out_dir, f"{name}.siv1"), m[None, :, :, None])
    side = {"d": p.d, "mask_mode": p.mask_mode, "matrices": list(_MATS)}
    with open(os.path.join(out_dir, "mixer.json"), "w") as f:
        json.dump(side, f, indent=2)


def load_params(in_dir: str) -> MixerParams:
    with open(os.path.join(in_dir, "mixer.json")) as f:
        side = json.load(f)
    mats = {}
    for name in _MATS:
        arr = read_siv1(os.path.join(in_dir, f"{name}.siv1"))
        mats[name] = arr[0, :, :, 0].copy()
    p = MixerParams(d=int(side["d"]), mask_mode=str(side["mask_mode"]), **mats)
    p.check()
    return p
