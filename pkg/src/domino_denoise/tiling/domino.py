"""Minimum-cost domino tilings and the even/odd filled image pair."""

from __future__ import annotations

import numpy as np

from .cost import build_cost_matrix
from .grid import Parity, ParityLike, Tiling, crop, pad_to_even, render_tiling
from .lap import solve_lap


def domino_tiling(img: np.ndarray, parity: ParityLike) -> Tiling:
    """Tiling from the assignment of `parity` pixels (agents) to neighbours.

    Pairs are stored as (agent cell, task cell).
    """
    img = np.asarray(img, dtype=np.float64)
    cm = build_cost_matrix(img, parity)
    assignment = solve_lap(cm)
    pairs = np.hstack([cm.agent_cells, cm.task_cells[assignment]])
    h, w = img.shape
    return Tiling(pairs, h, w)


def pixel_domino_pair(img: np.ndarray, return_tilings: bool = False):
    """Full-size even- and odd-kept filled images.

    The even image keeps even pixels and fills each odd gap from its partner
    in the even-built tiling; the odd image mirrors this. Odd dimensions are
    mirror-padded for the solve and cropped afterwards.
    """
    padded, info = pad_to_even(img)
    t_even = domino_tiling(padded, Parity.EVEN)
    t_odd = domino_tiling(padded, Parity.ODD)
    even_filled = crop(render_tiling(padded, t_even, Parity.EVEN), info)
    odd_filled = crop(render_tiling(padded, t_odd, Parity.ODD), info)
    if return_tilings:
        return even_filled, odd_filled, t_even, t_odd
    return even_filled, odd_filled
