"""Gap-filling strategies that skip the tiling (ablation baselines).

Each keeps one parity in place and fills the other parity's cells from
their in-bounds 4-neighbours, without the one-source-per-gap constraint.
"""

from __future__ import annotations

import numpy as np

from .cost import DIRECTIONS, direction_costs
from .grid import Parity, ParityLike


def _neighbor_stack(img: np.ndarray):
    """Neighbour values and in-bounds flags, shape (4, H, W), DIRECTIONS order."""
    h, w = img.shape
    pad = np.pad(img, 1)
    vals = np.empty((4, h, w))
    ok = np.zeros((4, h, w), dtype=bool)
    ii, jj = np.indices((h, w))
    for d, (di, dj) in enumerate(DIRECTIONS):
        vals[d] = pad[1 + di: 1 + di + h, 1 + dj: 1 + dj + w]
        ok[d] = (ii + di >= 0) & (ii + di < h) & (jj + dj >= 0) & (jj + dj < w)
    return vals, ok


def _gaps(img: np.ndarray, keep: ParityLike) -> np.ndarray:
    h, w = img.shape
    return Parity.coerce(keep).other.mask(h, w)


def fill_avg_neighbor(img: np.ndarray, keep: ParityLike) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    vals, ok = _neighbor_stack(img)
    n = ok.sum(axis=0)
    mean = np.where(ok, vals, 0.0).sum(axis=0) / np.maximum(n, 1)
    gaps = _gaps(img, keep) & (n > 0)
    out = img.copy()
    out[gaps] = mean[gaps]
    return out


def fill_random_neighbor(img: np.ndarray, keep: ParityLike, seed: int = 0) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    vals, ok = _neighbor_stack(img)
    n = ok.sum(axis=0)
    rng = np.random.default_rng(seed)
    # pick the r-th in-bounds neighbour, r uniform on [0, n)
    r = np.floor(rng.random(img.shape) * n).astype(np.int64)
    rank = np.cumsum(ok, axis=0) - 1
    choice = np.argmax(ok & (rank == r[None]), axis=0)
    picked = np.take_along_axis(vals, choice[None], axis=0)[0]
    gaps = _gaps(img, keep) & (n > 0)
    out = img.copy()
    out[gaps] = picked[gaps]
    return out


def fill_best_neighbor(img: np.ndarray, keep: ParityLike) -> np.ndarray:
    """Fill from the lowest-cost neighbour; ties go up, down, left, right."""
    img = np.asarray(img, dtype=np.float64)
    vals, ok = _neighbor_stack(img)
    cost = np.where(ok, direction_costs(img), np.inf)
    choice = np.argmin(cost, axis=0)  # first minimum wins
    picked = np.take_along_axis(vals, choice[None], axis=0)[0]
    gaps = _gaps(img, keep) & ok.any(axis=0)
    out = img.copy()
    out[gaps] = picked[gaps]
    return out


FILLS = {
    "avg": fill_avg_neighbor,
    "rand": fill_random_neighbor,
    "best": fill_best_neighbor,
}
