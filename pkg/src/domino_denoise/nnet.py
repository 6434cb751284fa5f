"""A small numpy network engine: partial convolutions, manual backprop, Adam.

The denoising network is a stack of 3x3 partial convolutions (stride 1,
same padding, ReLU) followed by a 1x1 convolution and a sigmoid. Tensors
are (channels, height, width) float64 arrays; masks are (height, width)
binary arrays shared by all channels.

Partial convolution renormalisation:

    y = W . (x * m) * (K / sum(m)) + b    where sum(m) > 0 over the window
    y = 0                                 otherwise (bias excluded)

K counts the window positions that fall inside the image, so an all-ones
mask gives exactly a zero-padded plain convolution, and out-of-bounds
positions never count as valid input.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imaging import atomic_write_bytes

DEFAULT_CHANNELS = 48
DEFAULT_LAYERS = 12

CHECKPOINT_MAGIC = b"DDNN"
CHECKPOINT_VERSION = 1


# patch-matrix blocks of about this many doubles stay cache-resident
_BLOCK_ELEMS = 32768


class _Workspace:
    """Reusable scratch arrays keyed by name."""

    def __init__(self):
        self._bufs = {}

    def get(self, key, shape) -> np.ndarray:
        buf = self._bufs.get(key)
        if buf is None or buf.shape != shape:
            buf = np.empty(shape)
            self._bufs[key] = buf
        return buf


def _windows(x: np.ndarray, ws: _Workspace) -> np.ndarray:
    """Zero-padded 3x3 windows of (C, H, W) as a (C, 3, 3, H, W) strided view."""
    c, h, w = x.shape
    pad = ws.get(("pad", c), (c, h + 2, w + 2))
    pad[:, 0] = 0.0
    pad[:, -1] = 0.0
    pad[:, :, 0] = 0.0
    pad[:, :, -1] = 0.0
    pad[:, 1:-1, 1:-1] = x
    return sliding_window_view(pad, (3, 3), axis=(1, 2)).transpose(0, 3, 4, 1, 2)


def _row_blocks(c: int, h: int, w: int):
    rows = max(1, _BLOCK_ELEMS // (c * 9 * w))
    for r0 in range(0, h, rows):
        yield r0, min(r0 + rows, h)


def _corr3(x: np.ndarray, wmat: np.ndarray, ws: _Workspace) -> np.ndarray:
    """Zero-padded 3x3 cross-correlation: x (Cin, H, W), wmat (Cout, Cin*9) -> (Cout, H*W)."""
    c, h, w = x.shape
    win = _windows(x, ws)
    out = np.empty((wmat.shape[0], h * w))
    for r0, r1 in _row_blocks(c, h, w):
        blk = ws.get(("blk", c, r1 - r0), (c, 3, 3, r1 - r0, w))
        np.copyto(blk, win[:, :, :, r0:r1])
        np.matmul(wmat, blk.reshape(c * 9, -1), out=out[:, r0 * w:r1 * w])
    return out


def _corr3_weight_grad(x: np.ndarray, g: np.ndarray, ws: _Workspace) -> np.ndarray:
    """Gradient of _corr3 w.r.t. wmat given output gradient g (Cout, H*W)."""
    c, h, w = x.shape
    win = _windows(x, ws)
    out = np.zeros((g.shape[0], c * 9))
    for r0, r1 in _row_blocks(c, h, w):
        blk = ws.get(("blk", c, r1 - r0), (c, 3, 3, r1 - r0, w))
        np.copyto(blk, win[:, :, :, r0:r1])
        out += g[:, r0 * w:r1 * w] @ blk.reshape(c * 9, -1).T
    return out


def _im2col(x: np.ndarray) -> np.ndarray:
    """Unblocked (C*9, H*W) patch matrix; reference path for tests."""
    c, h, w = x.shape
    return np.ascontiguousarray(_windows(x, _Workspace())).reshape(c * 9, h * w)


def _box3(m: np.ndarray) -> np.ndarray:
    """3x3 window sums with zeros outside the image."""
    h, w = m.shape
    pad = np.zeros((h + 2, w + 2))
    pad[1:-1, 1:-1] = m
    out = np.zeros((h, w))
    for ky in range(3):
        for kx in range(3):
            out += pad[ky:ky + h, kx:kx + w]
    return out


def _as_mask(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    m = np.asarray(mask, dtype=np.float64)
    if m.ndim == 3:
        if m.shape[0] != 1:
            raise ValueError(f"mask must have a single channel, got {m.shape}")
        m = m[0]
    if m.shape != shape:
        raise ValueError(f"mask shape {m.shape} does not match {shape}")
    return m


@dataclass
class _LayerCache:
    x_masked: np.ndarray
    mask: np.ndarray
    ratio: np.ndarray
    mask_out: np.ndarray
    active: np.ndarray


def _pconv(x, mask, weight, bias, ws=None):
    cin, h, w = x.shape
    cout = weight.shape[0]
    if weight.shape != (cout, cin, 3, 3):
        raise ValueError(f"weight shape {weight.shape} incompatible with {cin} input channels")
    ws = ws or _Workspace()
    msum = _box3(mask)
    valid = _box3(np.ones_like(mask))
    mask_out = (msum > 0).astype(np.float64)
    ratio = np.divide(valid, msum, out=np.zeros_like(msum), where=msum > 0)
    xm = x * mask
    z = _corr3(xm, weight.reshape(cout, -1), ws)
    z *= ratio.reshape(1, -1)
    z += bias[:, None] * mask_out.reshape(1, -1)
    cache = _LayerCache(xm, mask, ratio.reshape(-1), mask_out.reshape(-1), None)
    return z.reshape(cout, h, w), mask_out, cache


def partial_conv_forward(x: np.ndarray, mask: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """One 3x3 partial convolution (no activation); returns (y, mask_out)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    m = _as_mask(mask, x.shape[1:])
    y, mask_out, _ = _pconv(x, m, np.asarray(weight, dtype=np.float64), np.asarray(bias, dtype=np.float64))
    return y, mask_out


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Network:
    """Partial-conv stack + 1x1 sigmoid head, with a single-step activation cache."""

    def __init__(self, weights, biases, head_weight, head_bias):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per conv layer and at least one layer")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.head_weight = np.asarray(head_weight, dtype=np.float64).reshape(1, -1)
        self.head_bias = np.asarray(head_bias, dtype=np.float64).reshape(1)
        if self.weights[0].shape[1] != 1:
            raise ValueError("first layer must take a single input channel")
        self._cache = None
        self._ws = _Workspace()

    @property
    def channels(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params += [w, b]
        return params + [self.head_weight, self.head_bias]

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """Map a (1, H, W) or (H, W) image in [0, 1] to a (1, H, W) output in (0, 1)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[0] != 1:
            raise ValueError(f"expected a single-channel image, got shape {x.shape}")
        h, w = x.shape[1:]
        m = np.ones((h, w)) if mask is None else _as_mask(mask, (h, w))

        caches = []
        a = x
        for weight, bias in zip(self.weights, self.biases):
            z, m, cache = _pconv(a, m, weight, bias, self._ws)
            cache.active = z > 0
            a = np.where(cache.active, z, 0.0)
            caches.append(cache)
        feats = a.reshape(self.channels, -1)
        logits = self.head_weight @ feats + self.head_bias[:, None]
        out = sigmoid(logits).reshape(1, h, w)
        self._cache = (caches, feats, (h, w))
        return out

    __call__ = forward

    def backward(self, dlogits: np.ndarray) -> list[np.ndarray]:
        """Gradients of the loss w.r.t. parameters(), given dloss/dlogits.

        Renormalisation ratios depend only on masks, so they are constants here.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        caches, feats, (h, w) = self._cache
        g = np.asarray(dlogits, dtype=np.float64).reshape(1, -1)
        grad_hw = g @ feats.T
        grad_hb = g.sum(axis=1)
        d = (self.head_weight.T @ g).reshape(self.channels, h, w)

        grads = []
        for layer in range(self.n_layers - 1, -1, -1):
            cache = caches[layer]
            weight = self.weights[layer]
            cout, cin = weight.shape[:2]
            dz = np.where(cache.active, d, 0.0).reshape(cout, -1)
            grad_b = dz @ cache.mask_out
            draw = dz * cache.ratio[None, :]
            grad_w = _corr3_weight_grad(cache.x_masked, draw, self._ws).reshape(weight.shape)
            grads.append((grad_w, grad_b))
            if layer > 0:
                # input gradient = correlation of draw with the spatially flipped kernel
                flipped = weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(cin, -1)
                d = _corr3(draw.reshape(cout, h, w), flipped, self._ws).reshape(cin, h, w) * cache.mask
        out = []
        for gw, gb in reversed(grads):
            out += [gw, gb]
        return out + [grad_hw, grad_hb]

    # ------------------------------------------------------------------
    # checkpoints
    # ------------------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = CHECKPOINT_MAGIC + struct.pack("<III", CHECKPOINT_VERSION, self.channels, self.n_layers)
        body = b"".join(p.astype("<f8").tobytes() for p in self.parameters())
        return header + body

    @classmethod
    def from_bytes(cls, payload: bytes) -> "Network":
        if payload[:4] != CHECKPOINT_MAGIC:
            raise ValueError("not a network checkpoint (bad magic)")
        version, channels, n_layers = struct.unpack_from("<III", payload, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        shapes = _param_shapes(channels, n_layers)
        expected = 16 + 8 * sum(int(np.prod(s)) for s in shapes)
        if len(payload) != expected:
            raise ValueError(f"checkpoint size {len(payload)} != expected {expected}")
        flat = np.frombuffer(payload, dtype="<f8", offset=16).astype(np.float64)
        params, pos = [], 0
        for s in shapes:
            size = int(np.prod(s))
            params.append(flat[pos:pos + size].reshape(s).copy())
            pos += size
        return cls(params[0:-2:2], params[1:-2:2], params[-2], params[-1])

    def save(self, path) -> None:
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_bytes(Path(path).read_bytes())


def _param_shapes(channels: int, n_layers: int) -> list[tuple[int, ...]]:
    shapes = []
    cin = 1
    for _ in range(n_layers):
        shapes += [(channels, cin, 3, 3), (channels,)]
        cin = channels
    return shapes + [(1, channels), (1,)]


def init_network(seed: int, channels: int = DEFAULT_CHANNELS, n_layers: int = DEFAULT_LAYERS) -> Network:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    if channels < 1 or n_layers < 1:
        raise ValueError("channels and n_layers must be >= 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    cin = 1
    for _ in range(n_layers):
        limit = np.sqrt(6.0 / (cin * 9))
        weights.append(rng.uniform(-limit, limit, size=(channels, cin, 3, 3)))
        biases.append(np.zeros(channels))
        cin = channels
    limit = np.sqrt(6.0 / channels)
    head = rng.uniform(-limit, limit, size=(1, channels))
    return Network(weights, biases, head, np.zeros(1))


# ----------------------------------------------------------------------
# loss
# ----------------------------------------------------------------------

BCE_EPS = 1e-7


def _loss_terms(pred, target, loss_mask):
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    sel = np.asarray(loss_mask).reshape(-1).astype(bool)
    if p.shape != t.shape or p.shape != sel.shape:
        raise ValueError("pred, target and loss_mask must have the same number of pixels")
    n = int(sel.sum())
    if n == 0:
        raise ValueError("empty loss mask")
    return p, t, sel, n


def bce_loss(pred: np.ndarray, target: np.ndarray, loss_mask: np.ndarray) -> float:
    """Mean binary cross-entropy over the selected pixels, p clamped to [1e-7, 1-1e-7]."""
    p, t, sel, n = _loss_terms(pred, target, loss_mask)
    pc = np.clip(p[sel], BCE_EPS, 1.0 - BCE_EPS)
    ts = t[sel]
    return float(-np.sum(ts * np.log(pc) + (1.0 - ts) * np.log(1.0 - pc)) / n)


def bce_logit_grad(pred: np.ndarray, target: np.ndarray, loss_mask: np.ndarray) -> np.ndarray:
    """d bce_loss / d logits for a sigmoid output; zero where the clamp is active."""
    p, t, sel, n = _loss_terms(pred, target, loss_mask)
    live = sel & (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    g = np.where(live, (p - t) / n, 0.0)
    return g.reshape(np.shape(pred))


# ----------------------------------------------------------------------
# optimiser
# ----------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> AdamState:
    """In-place Adam update with bias correction."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
