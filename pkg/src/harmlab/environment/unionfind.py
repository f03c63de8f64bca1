"""Union-find over array-labelled sites, used to extract percolation clusters."""
from __future__ import annotations

import numpy as np


class UnionFind:
    """Disjoint sets over ``0..size-1`` with path compression and union by size.

    ``union_edges`` processes a whole edge array at once by repeated hooking of
    larger roots onto smaller ones followed by pointer jumping, which keeps the
    work in numpy for lattice-sized inputs.
    """

    def __init__(self, size: int):
        self.parent = np.arange(size, dtype=np.int64)
        self.size = np.ones(size, dtype=np.int64)

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return int(root)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def _compress(self) -> None:
        p = self.parent
        while True:
            pp = p[p]
            if np.array_equal(pp, p):
                break
            p[:] = pp

    def union_edges(self, a: np.ndarray, b: np.ndarray) -> None:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        p = self.parent
        while a.size:
            self._compress()
            ra, rb = p[a], p[b]
            live = ra != rb
            a, b, ra, rb = a[live], b[live], ra[live], rb[live]
            if not a.size:
                break
            hi = np.maximum(ra, rb)
            lo = np.minimum(ra, rb)
            # several edges may hook the same root; any one winner is fine
            np.minimum.at(p, hi, lo)
        self._compress()
        self.size = np.bincount(p, minlength=p.size)

    def labels(self) -> np.ndarray:
        self._compress()
        return self.parent.copy()

    def components(self) -> list[np.ndarray]:
        lab = self.labels()
        order = np.argsort(lab, kind="stable")
        cuts = np.flatnonzero(np.diff(lab[order])) + 1
        return np.split(order, cuts)

    def largest(self) -> np.ndarray:
        """Members of the largest set (smallest root label on ties), sorted."""
        lab = self.labels()
        counts = np.bincount(lab, minlength=lab.size)
        best = int(np.argmax(counts))
        return np.flatnonzero(lab == best)
