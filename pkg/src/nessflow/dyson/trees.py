"""Counting labelled trees by vertex degree.

The contraction schemes of the m-th Dyson term are indexed by trees on the
vertices ``0..m``; the degree ``e_j`` of vertex ``j`` is its incidence number.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from typing import Sequence

from ..errors import InvalidIncidence


def tree_count(incidence: Sequence[int]) -> int:
    """Number of labelled trees on ``m + 1`` vertices with degrees ``e_0 .. e_m``.

    ``(m - 1)! / prod_j (e_j - 1)!``; requires ``sum e_j = 2m`` and ``e_j >= 1``.
    """
    e = [int(x) for x in incidence]
    m = len(e) - 1
    if m < 1:
        raise InvalidIncidence("need at least two vertices")
    if any(x < 1 for x in e):
        raise InvalidIncidence(f"every degree must be >= 1, got {e}")
    if sum(e) != 2 * m:
        raise InvalidIncidence(f"degrees sum to {sum(e)}, expected 2m = {2 * m}")
    out = math.factorial(m - 1)
    for x in e:
        out //= math.factorial(x - 1)
    return out


def prufer_to_edges(seq: Sequence[int], n: int):
    """Decode a Prüfer sequence of length ``n - 2`` into the edge list of a tree on ``0..n-1``."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = min(u for u in range(n) if degree[u] == 1)
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (x for x in range(n) if degree[x] == 1)
    edges.append((u, w))
    return edges


def tree_enumerate(m: int, decode: bool = False) -> Counter:
    """Tally of degree profiles over all labelled trees on ``m + 1`` vertices.

    Walks every Prüfer sequence; a vertex appearing ``c`` times has degree
    ``c + 1``.  With ``decode=True`` each tree is rebuilt and degrees are read
    off its edges instead (slower, used to cross-check small ``m``).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > 8:
        raise ValueError("enumeration is limited to m <= 8")
    n = m + 1
    tally = Counter()
    for seq in itertools.product(range(n), repeat=n - 2):
        if decode:
            deg = [0] * n
            for a, b in prufer_to_edges(seq, n):
                deg[a] += 1
                deg[b] += 1
        else:
            deg = [1] * n
            for v in seq:
                deg[v] += 1
        tally[tuple(deg)] += 1
    return tally


def incidence_sum_identity(N: int) -> int:
    """``sum_{e=0}^{2N} C(2N, e)``, checked against ``4^N``."""
    if N < 0:
        raise ValueError("N must be >= 0")
    total = sum(math.comb(2 * N, e) for e in range(2 * N + 1))
    assert total == 4**N, (total, N)
    return total
