"""Sparse Jonker-Volgenant solver for balanced linear assignment.

The three classic phases run on adjacency lists only (forbidden pairs are
never materialised): column reduction with reduction transfer, two passes
of augmenting row reduction, then shortest augmenting paths found with a
heap-based Dijkstra over reduced costs. Column potentials ``v`` are kept
explicitly; a row's potential is implied by its assigned column.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .cost import CostMatrix

INF = math.inf


class InfeasibleError(ValueError):
    """No perfect matching exists over the permitted entries."""


def _adjacency(costs: CostMatrix):
    indptr = costs.indptr.tolist()
    idx = costs.indices.tolist()
    val = costs.costs.tolist()
    rows = [
        list(zip(idx[indptr[i]:indptr[i + 1]], val[indptr[i]:indptr[i + 1]]))
        for i in range(costs.n_agents)
    ]
    return rows


def _column_reduction(rows, n):
    v = [INF] * n
    best_row = [-1] * n
    for i, edges in enumerate(rows):
        for j, c in edges:
            if c < v[j]:
                v[j] = c
                best_row[j] = i
    if any(r < 0 for r in best_row):
        raise InfeasibleError("a task has no permitted agent")

    x = [-1] * n  # agent -> task
    y = [-1] * n  # task -> agent
    hits = [0] * n
    for j in range(n - 1, -1, -1):
        i = best_row[j]
        hits[i] += 1
        if x[i] < 0:
            x[i] = j
            y[j] = i

    free = []
    for i in range(n):
        if hits[i] == 0:
            free.append(i)
        elif hits[i] == 1:
            # reduction transfer: push the row's slack onto its column
            j1 = x[i]
            mu = INF
            for j, c in rows[i]:
                if j != j1:
                    r = c - v[j]
                    if r < mu:
                        mu = r
            if mu < INF:
                v[j1] -= mu - (_cost(rows[i], j1) - v[j1])
    return x, y, v, free


def _cost(edges, j):
    for jj, c in edges:
        if jj == j:
            return c
    raise KeyError(j)


def _two_smallest(edges, v):
    u1 = u2 = INF
    j1 = j2 = -1
    for j, c in edges:
        r = c - v[j]
        if r < u2:
            if r < u1:
                u2, j2 = u1, j1
                u1, j1 = r, j
            else:
                u2, j2 = r, j
    return u1, j1, u2, j2


def _augmenting_row_reduction(rows, x, y, v, free):
    # potentials can fall without bound on infeasible instances, so each pass
    # is capped; leftovers go to the shortest-path phase, which detects that
    budget = 8 * len(rows) + 64
    for _ in range(2):
        k = 0
        steps = 0
        pending = list(free)
        free = []
        while k < len(pending):
            steps += 1
            if steps > budget:
                free.extend(pending[k:])
                break
            i = pending[k]
            k += 1
            edges = rows[i]
            if not edges:
                raise InfeasibleError(f"agent {i} has no permitted task")
            u1, j1, u2, j2 = _two_smallest(edges, v)
            i0 = y[j1]
            # a single-edge row cannot transfer slack; its victim waits a pass
            strict = u1 < u2 < INF
            if strict:
                v[j1] -= u2 - u1
            elif u1 == u2 and i0 >= 0:
                j1 = j2
                i0 = y[j2]
            x[i] = j1
            y[j1] = i
            if i0 >= 0:
                x[i0] = -1
                if strict:
                    k -= 1
                    pending[k] = i0
                else:
                    free.append(i0)
    return free


def _shortest_augmenting_path(rows, x, y, v, f):
    dist = {}
    pred = {}
    heap = []
    for j, c in rows[f]:
        d = c - v[j]
        if d < dist.get(j, INF):
            dist[j] = d
            pred[j] = f
            heapq.heappush(heap, (d, j))

    done = set()
    scanned = []
    sink = -1
    dmin = INF
    while heap:
        dj, j = heapq.heappop(heap)
        if j in done or dj > dist[j]:
            continue
        done.add(j)
        scanned.append(j)
        i = y[j]
        if i < 0:
            sink, dmin = j, dj
            break
        base = _cost(rows[i], j) - v[j]
        for j2, c2 in rows[i]:
            if j2 in done:
                continue
            nd = dj + (c2 - v[j2] - base)
            if nd < dist.get(j2, INF):
                dist[j2] = nd
                pred[j2] = i
                heapq.heappush(heap, (nd, j2))
    if sink < 0:
        raise InfeasibleError(f"no augmenting path from agent {f}")

    for j in scanned:
        v[j] += dist[j] - dmin

    j = sink
    while True:
        i = pred[j]
        y[j] = i
        x[i], j = j, x[i]
        if i == f:
            break


def solve_lap(costs: CostMatrix) -> np.ndarray:
    """Minimum-cost perfect assignment; returns task index per agent.

    Raises InfeasibleError when no perfect matching exists over the
    permitted entries. Free agents are processed in increasing index order,
    so results are deterministic.
    """
    n = costs.n_agents
    if costs.n_tasks != n:
        raise ValueError("assignment instance must be balanced")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rows = _adjacency(costs)
    if any(not edges for edges in rows):
        raise InfeasibleError("an agent has no permitted task")

    x, y, v, free = _column_reduction(rows, n)
    free = _augmenting_row_reduction(rows, x, y, v, sorted(free))
    for f in sorted(free):
        _shortest_augmenting_path(rows, x, y, v, f)
    return np.asarray(x, dtype=np.int64)


def assignment_cost(costs: CostMatrix, assignment: np.ndarray) -> float:
    return float(sum(costs.entry(i, int(j)) for i, j in enumerate(assignment)))
