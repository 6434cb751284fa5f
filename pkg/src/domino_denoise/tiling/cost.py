"""Directional proxy-variance cost between a pixel and a 4-neighbour.

For a pixel (i, j) and direction (c1, c2) the cost compares the two pixel
pairs running parallel to the candidate domino on either side of it:

    C = (x(i+c2, j+c1) - x(i+c1+c2, j+c1+c2))**2
      + (x(i-c2, j-c1) - x(i+c1-c2, j-c1+c2))**2

The paired pixels themselves never enter their own cost. Out-of-range proxy
indices are mirrored at the border (half-sample symmetric: -1 -> 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Parity, ParityLike, Tiling

# fixed order used for tie-breaking: up, down, left, right
DIRECTIONS: tuple[tuple[int, int], ...] = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _mirror(k: int, n: int) -> int:
    period = 2 * n
    k %= period
    return k if k < n else period - 1 - k


def neighbor_cost(img: np.ndarray, pixel: tuple[int, int], direction: tuple[int, int]) -> float:
    if tuple(direction) not in DIRECTIONS:
        raise ValueError(f"invalid direction {direction!r}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    i, j = pixel
    c1, c2 = direction

    def x(a, b):
        return img[_mirror(a, h), _mirror(b, w)]

    t1 = x(i + c2, j + c1) - x(i + c1 + c2, j + c1 + c2)
    t2 = x(i - c2, j - c1) - x(i + c1 - c2, j - c1 + c2)
    return float(t1 * t1 + t2 * t2)


def direction_costs(img: np.ndarray) -> np.ndarray:
    """Vectorised neighbor_cost for every pixel: array (4, H, W) in DIRECTIONS order.

    Costs toward out-of-bounds partners are still computed; callers mask them.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    # every proxy offset lies within +-1, so one mirrored ring suffices
    pad = np.pad(img, 1, mode="symmetric")

    def shifted(di, dj):
        return pad[1 + di: 1 + di + h, 1 + dj: 1 + dj + w]

    out = np.empty((4, h, w))
    for d, (c1, c2) in enumerate(DIRECTIONS):
        t1 = shifted(c2, c1) - shifted(c1 + c2, c1 + c2)
        t2 = shifted(-c2, -c1) - shifted(c1 - c2, -c1 + c2)
        out[d] = t1 * t1 + t2 * t2
    return out


@dataclass
class CostMatrix:
    """Sparse balanced assignment instance in CSR layout (agents are rows).

    Absent entries are forbidden. Grid instances also carry the pixel
    coordinates of agents and tasks.
    """

    n_agents: int
    n_tasks: int
    indptr: np.ndarray
    indices: np.ndarray
    costs: np.ndarray
    agent_cells: Optional[np.ndarray] = field(default=None, repr=False)
    task_cells: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_dense(cls, dense) -> "CostMatrix":
        """Dense square matrix; inf or nan entries are treated as forbidden."""
        dense = np.asarray(dense, dtype=np.float64)
        n, m = dense.shape
        if n != m:
            raise ValueError("assignment instance must be square")
        allowed = np.isfinite(dense)
        rows, cols = np.nonzero(allowed)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(allowed.sum(axis=1), out=indptr[1:])
        return cls(n, n, indptr, cols.astype(np.int64), dense[rows, cols])

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def entry(self, agent: int, task: int) -> float:
        lo, hi = self.indptr[agent], self.indptr[agent + 1]
        hit = np.nonzero(self.indices[lo:hi] == task)[0]
        if len(hit) == 0:
            raise KeyError((agent, task))
        return float(self.costs[lo + hit[0]])

    def to_dense(self, fill: float = np.inf) -> np.ndarray:
        out = np.full((self.n_agents, self.n_tasks), fill)
        rows = np.repeat(np.arange(self.n_agents), self.degree())
        out[rows, self.indices] = self.costs
        return out


def build_cost_matrix(img: np.ndarray, parity: ParityLike) -> CostMatrix:
    """Agents are pixels of `parity`, tasks the opposite parity, both row-major."""
    parity = Parity.coerce(parity)
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    agent_mask = parity.mask(h, w)
    task_mask = ~agent_mask
    if agent_mask.sum() != task_mask.sum():
        raise ValueError(f"{h}x{w} grid has unequal parity classes; pad it first")

    task_id = np.full((h, w), -1, dtype=np.int64)
    task_id[task_mask] = np.arange(task_mask.sum())
    agent_cells = np.argwhere(agent_mask)
    task_cells = np.argwhere(task_mask)
    n = len(agent_cells)

    dcost = direction_costs(img)
    ai, aj = agent_cells[:, 0], agent_cells[:, 1]
    cand_task = np.full((n, 4), -1, dtype=np.int64)
    cand_cost = np.zeros((n, 4))
    for d, (di, dj) in enumerate(DIRECTIONS):
        ti, tj = ai + di, aj + dj
        ok = (ti >= 0) & (ti < h) & (tj >= 0) & (tj < w)
        cand_task[ok, d] = task_id[ti[ok], tj[ok]]
        cand_cost[:, d] = dcost[d, ai, aj]

    # adjacency lists sorted by task index for a deterministic scan order
    order = np.argsort(np.where(cand_task < 0, np.iinfo(np.int64).max, cand_task), axis=1, kind="stable")
    cand_task = np.take_along_axis(cand_task, order, axis=1)
    cand_cost = np.take_along_axis(cand_cost, order, axis=1)
    valid = cand_task >= 0
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(valid.sum(axis=1), out=indptr[1:])
    return CostMatrix(
        n_agents=n,
        n_tasks=n,
        indptr=indptr,
        indices=cand_task[valid],
        costs=cand_cost[valid],
        agent_cells=agent_cells,
        task_cells=task_cells,
    )


def tiling_cost(img: np.ndarray, t: Tiling) -> float:
    """Total cost of a tiling; each domino is costed once (the cost is symmetric)."""
    dcost = direction_costs(img)
    p = t.pairs
    d = np.empty(len(p), dtype=np.int64)
    delta = p[:, 2:4] - p[:, 0:2]
    for k, step in enumerate(DIRECTIONS):
        d[(delta[:, 0] == step[0]) & (delta[:, 1] == step[1])] = k
    return float(dcost[d, p[:, 0], p[:, 1]].sum())
