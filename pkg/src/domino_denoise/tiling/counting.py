"""Counting and enumerating domino tilings of an m x n rectangle."""

from __future__ import annotations

import math

import numpy as np

from .grid import Tiling

MAX_EXACT_AREA = 10_000
# the profile DP carries 2**min(m, n) states
MAX_EXACT_PROFILE = 12
MAX_ENUM_AREA = 24


class SizeLimitError(ValueError):
    pass


def count_tilings_formula(m: int, n: int) -> float:
    """Kasteleyn's closed-form product, in double precision (round the result)."""
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    def terms(k):
        # cos(pi/2) = 0 exactly; the float cosine would leave ~1e-33 behind
        return [0.0 if 2 * i == k + 1 else 4.0 * math.cos(math.pi * i / (k + 1)) ** 2 for i in range(1, math.ceil(k / 2) + 1)]

    total = 1.0
    for ci in terms(m):
        for cj in terms(n):
            total *= ci + cj
    return total


def count_tilings_exact(m: int, n: int) -> int:
    """Exact integer count for m * n <= 10**4.

    Narrow grids use the transfer-matrix DP; wider ones an integer resultant.
    """
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    if m * n > MAX_EXACT_AREA:
        raise SizeLimitError(f"{m}x{n} exceeds the exact-count area limit {MAX_EXACT_AREA}")
    if (m * n) % 2:
        return 0
    if min(m, n) <= MAX_EXACT_PROFILE:
        return count_tilings_transfer(m, n)
    return count_tilings_resultant(m, n)


def count_tilings_transfer(m: int, n: int) -> int:
    """Exact count by a broken-profile transfer-matrix DP over bitmasks."""
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    if (m * n) % 2:
        return 0
    k, length = min(m, n), max(m, n)
    if k > MAX_EXACT_PROFILE:
        raise SizeLimitError(f"narrow side {k} exceeds the profile limit {MAX_EXACT_PROFILE}")

    # bits below `row` describe the next column, bits at or above it the current one
    dp = {0: 1}
    for col in range(length):
        last_col = col == length - 1
        for row in range(k):
            bit = 1 << row
            nxt: dict[int, int] = {}
            for mask, cnt in dp.items():
                if mask & bit:
                    key = mask & ~bit
                    nxt[key] = nxt.get(key, 0) + cnt
                    continue
                if not last_col:
                    key = mask | bit
                    nxt[key] = nxt.get(key, 0) + cnt
                if row + 1 < k and not mask & (bit << 1):
                    key = mask | (bit << 1)
                    nxt[key] = nxt.get(key, 0) + cnt
            dp = nxt
    return dp.get(0, 0)


def _half_chebyshev(k: int) -> list[int]:
    """Monic integer polynomial in w whose roots are 4 cos^2(pi j / (k + 1)), j <= ceil(k / 2).

    Coefficients low to high. Built from S_k(z) = z S_{k-1} - S_{k-2}, whose
    roots are 2 cos(pi j / (k + 1)); S_k only has terms of k's parity.
    """
    prev, cur = [1], [0, 1]
    for _ in range(k - 1):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    if k == 0:
        cur = prev
    if k % 2 == 0:
        return cur[0::2]
    return [0] + cur[1::2]  # odd k: S_k = z A(z^2), and cos = 0 adds the root w = 0


def _poly_mod(p: list[int], q: list[int]) -> list[int]:
    """Remainder of p modulo the monic polynomial q."""
    p = list(p)
    d = len(q) - 1
    for top in range(len(p) - 1, d - 1, -1):
        c = p[top]
        if c:
            for i in range(d + 1):
                p[top - d + i] -= c * q[i]
    return (p + [0] * d)[:d]


def _bareiss_det(a: list[list[int]]) -> int:
    """Fraction-free determinant of an integer matrix."""
    a = [row[:] for row in a]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k]), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1] if n else 1


def count_tilings_resultant(m: int, n: int) -> int:
    """Exact count as |Res(B_m(w), B_n(-w))|, the product formula in integers.

    The product over i, j of (4cos^2 a_i + 4cos^2 b_j) is the resultant of
    the two half-Chebyshev polynomials, evaluated as the determinant of
    multiplication by B_n(-w) modulo the smaller B_m.
    """
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    if (m * n) % 2:
        return 0
    m, n = sorted((m, n))
    bm = _half_chebyshev(m)
    g = [c if i % 2 == 0 else -c for i, c in enumerate(_half_chebyshev(n))]
    d = len(bm) - 1
    cols = [_poly_mod([0] * i + g, bm) for i in range(d)]
    matrix = [[cols[j][i] for j in range(d)] for i in range(d)]
    return abs(_bareiss_det(matrix))


def enumerate_tilings(m: int, n: int) -> list[Tiling]:
    """Every domino tiling of an m x n grid by backtracking (m*n <= 24)."""
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be positive")
    if m * n > MAX_ENUM_AREA:
        raise SizeLimitError(f"{m}x{n} exceeds the enumeration limit {MAX_ENUM_AREA}")
    if (m * n) % 2:
        return []
    covered = np.zeros((m, n), dtype=bool)
    pairs: list[tuple[int, int, int, int]] = []
    out: list[Tiling] = []

    def place(pos: int):
        while pos < m * n and covered[divmod(pos, n)]:
            pos += 1
        if pos == m * n:
            out.append(Tiling(np.array(pairs), m, n))
            return
        i, j = divmod(pos, n)
        for k, l in ((i, j + 1), (i + 1, j)):
            if k < m and l < n and not covered[k, l]:
                covered[i, j] = covered[k, l] = True
                pairs.append((i, j, k, l))
                place(pos + 1)
                pairs.pop()
                covered[i, j] = covered[k, l] = False

    place(0)
    return out
