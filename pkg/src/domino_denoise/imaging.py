"""Grayscale image I/O, synthetic noise and quality metrics.

Intensities are stored as float64 arrays in [0, 1], normalized by the full
range of the source bit depth (255 or 65535), never by the per-image max.
"""

from __future__ import annotations

import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image as PILImage
from scipy.signal import convolve2d

__all__ = [
    "FormatError",
    "Image",
    "NoiseSpec",
    "load_image",
    "save_image",
    "add_gaussian_noise",
    "add_poisson_noise",
    "add_noise",
    "psnr",
    "ssim",
    "format_metric",
]


class FormatError(ValueError):
    """Raised for files that are not 8/16-bit single-channel PNG or PGM."""


@dataclass(frozen=True)
class Image:
    data: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"expected a non-empty 2D array, got shape {data.shape}")
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit_depth must be 8 or 16, got {self.bit_depth}")
        if not np.all((data >= 0.0) & (data <= 1.0)):
            raise ValueError("intensities must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    sigma: Optional[float] = None
    peak: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sigma is None or self.sigma < 0:
                raise ValueError("gaussian noise requires sigma >= 0")
        elif self.kind == "poisson":
            if self.peak is None or self.peak <= 0:
                raise ValueError("poisson noise requires peak > 0")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")


ArrayOrImage = Union[np.ndarray, Image]


def _as_array(img: ArrayOrImage) -> np.ndarray:
    if isinstance(img, Image):
        return img.data
    return np.asarray(img, dtype=np.float64)


# --------------------------------------------------------------------------
# PGM (binary P5)
# --------------------------------------------------------------------------

def _pgm_tokens(buf: bytes, count: int):
    """Read `count` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(buf):
            raise FormatError("truncated PGM header")
        ch = buf[pos:pos + 1]
        if ch == b"#":
            end = buf.find(b"\n", pos)
            pos = len(buf) if end < 0 else end + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(buf) and not buf[pos:pos + 1].isspace():
                pos += 1
            tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def _read_pgm(raw: bytes) -> tuple[np.ndarray, int]:
    tokens, offset = _pgm_tokens(raw, 4)
    if tokens[0] != b"P5":
        raise FormatError("only binary PGM (P5) is supported")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError("malformed PGM header") from exc
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise FormatError("malformed PGM header")
    depth = 8 if maxval < 256 else 16
    dtype = np.dtype(">u2") if depth == 16 else np.dtype("u1")
    n = width * height
    if len(raw) - offset < n * dtype.itemsize:
        raise FormatError("truncated PGM raster")
    pixels = np.frombuffer(raw, dtype=dtype, count=n, offset=offset)
    return pixels.reshape(height, width).astype(np.float64) / (2**depth - 1), depth


def _pgm_bytes(q: np.ndarray, depth: int) -> bytes:
    h, w = q.shape
    header = f"P5\n{w} {h}\n{2**depth - 1}\n".encode("ascii")
    dtype = ">u2" if depth == 16 else "u1"
    return header + q.astype(dtype).tobytes()


# --------------------------------------------------------------------------
# public I/O
# --------------------------------------------------------------------------

def load_image(path: Union[str, os.PathLike]) -> Image:
    """Load an 8- or 16-bit single-channel PNG or PGM into [0, 1]."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"P5":
        data, depth = _read_pgm(raw)
        return Image(data, depth)
    if raw[:2] in (b"P2", b"P3", b"P6", b"P1", b"P4"):
        raise FormatError(f"{path}: unsupported netpbm variant {raw[:2].decode()}")
    if raw[:8] != b"\x89PNG\r\n\x1a\n":
        raise FormatError(f"{path}: not a PNG or PGM file")
    try:
        with PILImage.open(path) as im:
            mode = im.mode
            arr = np.array(im)
    except Exception as exc:
        raise FormatError(f"{path}: unreadable PNG ({exc})") from exc
    if mode == "L":
        depth = 8
    elif mode in ("I;16", "I;16B", "I;16L", "I"):
        depth = 16
    else:
        raise FormatError(f"{path}: unsupported PNG mode {mode} (need 8/16-bit grayscale)")
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected a single channel")
    if arr.min() < 0 or arr.max() > 2**depth - 1:
        raise FormatError(f"{path}: pixel values exceed {depth}-bit range")
    return Image(arr.astype(np.float64) / (2**depth - 1), depth)


def _quantize(data: np.ndarray, depth: int) -> np.ndarray:
    scale = 2**depth - 1
    return np.rint(np.clip(data, 0.0, 1.0) * scale).astype(np.uint16 if depth == 16 else np.uint8)


def encode_image(img: ArrayOrImage, fmt: str, bit_depth: Optional[int] = None) -> bytes:
    """Serialize to PNG or PGM bytes."""
    data = _as_array(img)
    depth = bit_depth or (img.bit_depth if isinstance(img, Image) else 8)
    q = _quantize(data, depth)
    if fmt == "pgm":
        return _pgm_bytes(q, depth)
    if fmt != "png":
        raise FormatError(f"unsupported output format {fmt!r}")
    buf = io.BytesIO()
    if depth == 16:
        pil = PILImage.fromarray(q.astype(np.uint16))
    else:
        pil = PILImage.fromarray(q)
    pil.save(buf, format="PNG")
    return buf.getvalue()


def _format_for(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".png":
        return "png"
    if suffix in (".pgm", ".pnm"):
        return "pgm"
    raise FormatError(f"{path}: cannot infer format from extension (use .png or .pgm)")


def atomic_write_bytes(path: Union[str, os.PathLike], payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_image(img: ArrayOrImage, path: Union[str, os.PathLike], bit_depth: Optional[int] = None) -> None:
    """Write a PNG or PGM (chosen by extension); the file appears atomically."""
    path = Path(path)
    atomic_write_bytes(path, encode_image(img, _format_for(path), bit_depth))


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

def add_gaussian_noise(img: ArrayOrImage, spec: NoiseSpec) -> np.ndarray:
    if spec.kind != "gaussian":
        raise ValueError("spec.kind must be 'gaussian'")
    x = _as_array(img)
    if spec.sigma == 0:
        return x.copy()
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(x.shape) * (spec.sigma / 255.0)
    return np.clip(x + noise, 0.0, 1.0)


def add_poisson_noise(img: ArrayOrImage, spec: NoiseSpec) -> np.ndarray:
    # peak-scaling convention: out = Poisson(x * peak) / peak
    if spec.kind != "poisson":
        raise ValueError("spec.kind must be 'poisson'")
    x = _as_array(img)
    rng = np.random.default_rng(spec.seed)
    counts = rng.poisson(x * spec.peak)
    return np.clip(counts / spec.peak, 0.0, 1.0)


def add_noise(img: ArrayOrImage, spec: NoiseSpec) -> np.ndarray:
    if spec.kind == "gaussian":
        return add_gaussian_noise(img, spec)
    return add_poisson_noise(img, spec)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def _pair(a: ArrayOrImage, b: ArrayOrImage) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(a), _as_array(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: ArrayOrImage, b: ArrayOrImage) -> float:
    """Peak signal-to-noise ratio in dB for unit data range; inf when identical."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a: ArrayOrImage, b: ArrayOrImage, data_range: float = 1.0) -> float:
    """Mean SSIM over valid 11x11 Gaussian (sigma 1.5) windows, K1=0.01, K2=0.03."""
    a, b = _pair(a, b)
    if min(a.shape) < 11:
        raise ValueError("ssim needs both sides >= 11 pixels")
    win = _gaussian_window()
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def filt(z):
        return convolve2d(z, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def format_metric(value: float) -> str:
    return "inf" if np.isinf(value) else f"{value:.4f}"
