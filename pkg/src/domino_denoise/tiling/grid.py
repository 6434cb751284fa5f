"""Checkerboard parity, padding, downsampling and the Tiling container."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np


class Parity(Enum):
    EVEN = 0
    ODD = 1

    @classmethod
    def coerce(cls, value: Union["Parity", str, int]) -> "Parity":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))

    @property
    def other(self) -> "Parity":
        return Parity.ODD if self is Parity.EVEN else Parity.EVEN

    def mask(self, height: int, width: int) -> np.ndarray:
        """Boolean map of the cells with this parity; (i + j) even is EVEN."""
        ii, jj = np.indices((height, width))
        return (ii + jj) % 2 == self.value


ParityLike = Union[Parity, str, int]


@dataclass(frozen=True)
class Crop:
    height: int
    width: int


def pad_to_even(img: np.ndarray) -> tuple[np.ndarray, Crop]:
    """Mirror-pad each odd dimension by one so the width and area are even."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    padded = np.pad(img, ((0, h % 2), (0, w % 2)), mode="symmetric")
    return padded, Crop(h, w)


def crop(img: np.ndarray, info: Crop) -> np.ndarray:
    return img[: info.height, : info.width]


def checkerboard_downsample(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split into two half-width images by alternating-pixel selection.

    even(i, j) = x(i, 2j + i mod 2) and odd(i, j) = x(i, 2j + i mod 2 + 1).
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if w % 2:
        raise ValueError(f"checkerboard_downsample needs an even width, got {w}")
    even = np.empty((h, w // 2))
    odd = np.empty((h, w // 2))
    even[0::2] = img[0::2, 0::2]
    odd[0::2] = img[0::2, 1::2]
    even[1::2] = img[1::2, 1::2]
    odd[1::2] = img[1::2, 0::2]
    return even, odd


@dataclass(frozen=True)
class Tiling:
    """A domino tiling as an (n, 4) integer array of rows (i, j, k, l)."""

    pairs: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 4)
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def as_set(self) -> frozenset:
        """Orientation-free representation, handy for comparing tilings."""
        out = set()
        for i, j, k, l in self.pairs.tolist():
            out.add(frozenset(((i, j), (k, l))))
        return frozenset(out)

    def partner_map(self) -> np.ndarray:
        """(H, W, 2) array giving each cell's domino partner; -1 where uncovered."""
        out = np.full((self.height, self.width, 2), -1, dtype=np.int64)
        p = self.pairs
        out[p[:, 0], p[:, 1]] = p[:, 2:4]
        out[p[:, 2], p[:, 3]] = p[:, 0:2]
        return out

    def to_csv(self) -> str:
        return "".join(f"{i},{j},{k},{l}\n" for i, j, k, l in self.pairs.tolist())


def verify_tiling(t: Tiling) -> bool:
    """True iff pairs are edge-adjacent, cover every cell once and mix parities."""
    h, w = t.height, t.width
    p = t.pairs
    if h <= 0 or w <= 0 or len(p) * 2 != h * w:
        return False
    if len(p) == 0:
        return True
    if p.min() < 0 or np.any(p[:, [0, 2]] >= h) or np.any(p[:, [1, 3]] >= w):
        return False
    if np.any(np.abs(p[:, 0] - p[:, 2]) + np.abs(p[:, 1] - p[:, 3]) != 1):
        return False
    # adjacency already forces opposite parities; checked anyway
    if np.any((p[:, 0] + p[:, 1]) % 2 == (p[:, 2] + p[:, 3]) % 2):
        return False
    hits = np.zeros(h * w, dtype=np.int64)
    np.add.at(hits, p[:, 0] * w + p[:, 1], 1)
    np.add.at(hits, p[:, 2] * w + p[:, 3], 1)
    return bool(np.all(hits == 1))


def _match_dims(img: np.ndarray, height: int, width: int) -> tuple[np.ndarray, Crop]:
    img = np.asarray(img, dtype=np.float64)
    if img.shape == (height, width):
        return img, Crop(height, width)
    padded, info = pad_to_even(img)
    if padded.shape != (height, width):
        raise ValueError(f"tiling is {height}x{width}, image is {img.shape[0]}x{img.shape[1]}")
    return padded, info


def render_tiling(img: np.ndarray, t: Tiling, keep: ParityLike) -> np.ndarray:
    """Keep one parity in place and fill each gap from its domino partner."""
    keep = Parity.coerce(keep)
    if not verify_tiling(t):
        raise ValueError("invalid tiling")
    padded, info = _match_dims(img, t.height, t.width)
    p = t.pairs
    first_kept = (p[:, 0] + p[:, 1]) % 2 == keep.value
    src = np.where(first_kept[:, None], p[:, 0:2], p[:, 2:4])
    dst = np.where(first_kept[:, None], p[:, 2:4], p[:, 0:2])
    out = padded.copy()
    out[dst[:, 0], dst[:, 1]] = padded[src[:, 0], src[:, 1]]
    return crop(out, info)
