"""Finite rooted Markov chains and the graph metric they induce."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

ROW_SUM_TOL = 1e-12

# Models whose finite box has a hard (non-periodic) boundary: walks there must
# stay within the (L/4)^2 horizon budget.
BOX_MODELS = frozenset({"percolation", "lattice", "conductance"})


class ValidationError(ValueError):
    """An environment violates one of its structural invariants."""


class HorizonError(ValueError):
    """A walk horizon exceeds the boundary budget of a box environment."""


@dataclass(frozen=True)
class EnvMeta:
    model: str
    d: int = 0
    L: int = 0
    seed: int = 0
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RootedEnvironment:
    """A rooted Markov chain ``(P, V, root)``.

    ``kernel`` is a row-stochastic CSR matrix. ``weights``, when present, is the
    symmetric conductance matrix the kernel was built from. ``coords`` holds
    integer positions in Z^d for lattice-embedded models.
    """

    kernel: sp.csr_matrix
    root: int
    meta: EnvMeta
    coords: np.ndarray | None = None
    weights: sp.csr_matrix | None = None

    @property
    def n_vertices(self) -> int:
        return self.kernel.shape[0]

    @property
    def reversible(self) -> bool:
        return self.weights is not None

    @cached_property
    def nu(self) -> np.ndarray:
        """Vertex weights nu(x) = sum_y nu(x, y); all ones for a general chain."""
        if self.weights is None:
            return np.ones(self.n_vertices)
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @cached_property
    def kernel_t(self) -> sp.csr_matrix:
        # mu P is computed as P^T mu
        return self.kernel.T.tocsr()

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.kernel.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.out_degree.max())

    @property
    def horizon_budget(self) -> int | None:
        """Largest walk horizon allowed on this environment, None if unlimited."""
        if self.meta.model in BOX_MODELS and not self.meta.params.get("torus", False):
            return (self.meta.L // 4) ** 2 if self.meta.L >= 4 else 0
        return None

    def check_horizon(self, n: int) -> None:
        budget = self.horizon_budget
        if budget is not None and n > budget:
            raise HorizonError(
                f"horizon {n} exceeds the boundary budget (L/4)^2 = {budget} "
                f"of the {self.meta.model} box with L={self.meta.L}"
            )

    def neighbors(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        """Targets y with P(x, y) > 0 and the corresponding probabilities."""
        lo, hi = self.kernel.indptr[x], self.kernel.indptr[x + 1]
        return self.kernel.indices[lo:hi], self.kernel.data[lo:hi]

    @cached_property
    def coord_index(self) -> dict:
        if self.coords is None:
            return {}
        return {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}

    def vertex_at(self, point) -> int | None:
        return self.coord_index.get(tuple(int(c) for c in point))

    def validate(self) -> "RootedEnvironment":
        validate(self)
        return self


def weights_from_edges(n: int, i, j, w) -> sp.csr_matrix:
    """Symmetric conductance matrix from an undirected edge list."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    w = np.asarray(w, dtype=float)
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([w, w])
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    W.sort_indices()
    return W


def kernel_from_weights(W: sp.csr_matrix) -> sp.csr_matrix:
    """P(x, y) = nu(x, y) / nu(x). Deterministic in the CSR layout of ``W``."""
    W = W.tocsr()
    nu = np.asarray(W.sum(axis=1)).ravel()
    if np.any(nu <= 0):
        raise ValidationError("isolated vertex: nu(x) = 0")
    row = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
    P = sp.csr_matrix((W.data / nu[row], W.indices.copy(), W.indptr.copy()), shape=W.shape)
    return P


def validate(env: RootedEnvironment) -> None:
    P = env.kernel
    n = P.shape[0]
    if P.shape != (n, n):
        raise ValidationError("kernel must be square")
    if n == 0:
        raise ValidationError("empty vertex set")
    if not 0 <= env.root < n:
        raise ValidationError(f"root {env.root} is not a vertex")
    if P.nnz and (P.data.min() < 0 or P.data.max() > 1):
        raise ValidationError("transition probabilities must lie in [0, 1]")
    rows = np.asarray(P.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(rows - 1.0) > ROW_SUM_TOL)
    if bad.size:
        x = int(bad[0])
        raise ValidationError(f"row {x} of the kernel sums to {rows[x]!r}, not 1")
    if env.weights is not None:
        W = env.weights
        if W.nnz and W.data.min() < 0:
            raise ValidationError("negative edge weight")
        if abs(W - W.T).max() > 0:
            raise ValidationError("edge weights are not symmetric")
        nu = np.asarray(W.sum(axis=1)).ravel()
        if np.any(nu <= 0):
            raise ValidationError("vertex with nu(x) = 0")
        expect = sp.diags(1.0 / nu) @ W
        diff = abs(expect - P)
        if diff.nnz and diff.max() > ROW_SUM_TOL:
            raise ValidationError("kernel is not nu(x, y) / nu(x)")
    if env.coords is not None:
        c = np.asarray(env.coords)
        if c.shape[0] != n:
            raise ValidationError("coordinate table length differs from vertex count")
        if np.unique(c, axis=0).shape[0] != n:
            raise ValidationError("duplicate coordinates")
    sym = (P + P.T).tocsr()
    reach = bfs_distances(sym, env.root)
    if np.any(reach < 0):
        raise ValidationError(
            f"vertex set is not connected: {int(np.sum(reach < 0))} vertices unreachable from the root"
        )


def bfs_distances(adj: sp.csr_matrix, source: int, max_radius: int | None = None) -> np.ndarray:
    """Graph distances from ``source`` along the positive arcs of ``adj``; -1 if unreached."""
    n = adj.shape[0]
    dist = np.full(n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    indptr, indices = adj.indptr, adj.indices
    while frontier.size and (max_radius is None or level < max_radius):
        starts, ends = indptr[frontier], indptr[frontier + 1]
        counts = ends - starts
        if counts.sum() == 0:
            break
        offs = np.repeat(starts - np.cumsum(counts) + counts, counts) + np.arange(counts.sum())
        nbrs = indices[offs]
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        level += 1
        dist[nbrs] = level
        frontier = nbrs
    return dist


@dataclass(frozen=True, eq=False)
class BallView:
    center: int
    radius: int
    members: np.ndarray  # sorted vertex ids
    distance: np.ndarray  # distance of each member from the center

    @property
    def boundary(self) -> np.ndarray:
        return self.members[self.distance == self.radius]

    @property
    def inner(self) -> np.ndarray:
        return self.members[self.distance < self.radius]

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.members] = True
        return m

    def __len__(self) -> int:
        return self.members.size

    def __contains__(self, v) -> bool:
        i = np.searchsorted(self.members, v)
        return bool(i < self.members.size and self.members[i] == v)


def distances(env: RootedEnvironment, x: int, max_radius: int | None = None) -> np.ndarray:
    """Directed graph distance d(x, .) = min{n : P^n(x, .) > 0}."""
    return bfs_distances(env.kernel, x, max_radius)


def ball(env: RootedEnvironment, x: int, r: int) -> BallView:
    if not 0 <= x < env.n_vertices:
        raise ValueError(f"vertex {x} is not in the environment")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    dist = distances(env, x, r)
    members = np.flatnonzero(dist >= 0)
    return BallView(center=int(x), radius=int(r), members=members, distance=dist[members])
