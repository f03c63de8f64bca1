"""Finite-volume generators for the environment models."""
from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.sparse as sp

from ..rng import philox
from .core import EnvMeta, RootedEnvironment, kernel_from_weights, weights_from_edges
from .unionfind import UnionFind

MAX_SIERPINSKI_LEVEL = 10


def box_coords(d: int, L: int) -> np.ndarray:
    """All points of {-L..L}^d in lexicographic order, shape (N, d)."""
    side = np.arange(-L, L + 1)
    grids = np.meshgrid(*([side] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def box_edges(d: int, L: int, torus: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-neighbour edges (i, j, axis) of the box, i the lower endpoint.

    With ``torus`` the box is wrapped periodically on every axis.
    """
    side = 2 * L + 1
    idx = np.arange(side**d).reshape((side,) * d)
    ii, jj, ax = [], [], []
    for axis in range(d):
        if torus:
            nxt = np.roll(idx, -1, axis=axis)
            a, b = idx.ravel(), nxt.ravel()
        else:
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[axis] = slice(0, side - 1)
            hi[axis] = slice(1, side)
            a, b = idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()
        ii.append(a)
        jj.append(b)
        ax.append(np.full(a.size, axis))
    return np.concatenate(ii), np.concatenate(jj), np.concatenate(ax)


def _nearest_origin(coords: np.ndarray) -> int:
    """Index of the point nearest the origin; ties go to the lexicographically smallest."""
    norm2 = np.sum(coords.astype(np.int64) ** 2, axis=1)
    keys = [coords[:, k] for k in reversed(range(coords.shape[1]))] + [norm2]
    return int(np.lexsort(keys)[0])


def _check_box(d: int, L: int) -> None:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if L < 1:
        raise ValueError(f"box radius must be >= 1, got {L}")


def gen_lattice(d: int, L: int, torus: bool = False) -> RootedEnvironment:
    _check_box(d, L)
    coords = box_coords(d, L)
    i, j, _ = box_edges(d, L, torus)
    if torus and 2 * L + 1 == 2:
        raise ValueError("torus side must be at least 3")
    W = weights_from_edges(len(coords), i, j, np.ones(i.size))
    meta = EnvMeta("lattice", d, L, 0, {"torus": bool(torus)})
    root = _nearest_origin(coords)
    return RootedEnvironment(kernel_from_weights(W), root, meta, coords, W)


def gen_torus(d: int, side: int) -> RootedEnvironment:
    """Discrete torus (Z / side Z)^d with unit weights, rooted at 0.

    The walk on it is stationary, so the entropy identities hold exactly.
    """
    if d < 1 or side < 3:
        raise ValueError(f"torus needs d >= 1 and side >= 3, got d={d}, side={side}")
    grid = np.arange(side**d).reshape((side,) * d)
    coords = np.stack(np.unravel_index(grid.ravel(), grid.shape), axis=1).astype(np.int64)
    i = np.concatenate([grid.ravel()] * d)
    j = np.concatenate([np.roll(grid, -1, axis=a).ravel() for a in range(d)])
    W = weights_from_edges(grid.size, i, j, np.ones(i.size))
    meta = EnvMeta("torus", d, side, 0, {"side": side})
    return RootedEnvironment(kernel_from_weights(W), 0, meta, coords, W)


def gen_percolation(d: int, L: int, p: float, seed: int) -> RootedEnvironment:
    """Largest cluster of bond percolation in the box {-L..L}^d."""
    if d < 2:
        raise ValueError(f"percolation needs d >= 2, got {d}")
    if L < 4:
        raise ValueError(f"percolation needs L >= 4, got {L}")
    if not 0.0 < p <= 1.0 or p != p:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    rng = philox(seed)
    coords = box_coords(d, L)
    i, j, _ = box_edges(d, L)
    keep = rng.random(i.size) < p
    i, j = i[keep], j[keep]
    uf = UnionFind(len(coords))
    uf.union_edges(i, j)
    cluster = uf.largest()
    if cluster.size < 2:
        raise ValueError("largest cluster is a single isolated vertex")
    relabel = np.full(len(coords), -1, dtype=np.int64)
    relabel[cluster] = np.arange(cluster.size)
    inside = relabel[i] >= 0
    ci, cj = relabel[i[inside]], relabel[j[inside]]
    sub = coords[cluster]
    W = weights_from_edges(cluster.size, ci, cj, np.ones(ci.size))
    meta = EnvMeta("percolation", d, L, int(seed), {"p": float(p)})
    return RootedEnvironment(kernel_from_weights(W), _nearest_origin(sub), meta, sub, W)


def gen_random_conductance(d: int, L: int, alpha: float, seed: int) -> RootedEnvironment:
    """Box of Z^d with iid conductances uniform on [alpha, 1/alpha]."""
    _check_box(d, L)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"ellipticity alpha must lie in (0, 1), got {alpha}")
    rng = philox(seed)
    coords = box_coords(d, L)
    i, j, _ = box_edges(d, L)
    w = rng.uniform(alpha, 1.0 / alpha, size=i.size)
    W = weights_from_edges(len(coords), i, j, w)
    meta = EnvMeta("conductance", d, L, int(seed), {"alpha": float(alpha)})
    return RootedEnvironment(kernel_from_weights(W), _nearest_origin(coords), meta, coords, W)


def gen_balanced(d: int, L: int, seed: int) -> RootedEnvironment:
    """Balanced environment on the periodic box: P(x, x+e_i) = P(x, x-e_i) = w_i(x) / 2 sum_j w_j(x).

    The box is wrapped so that every site has both neighbours on every axis;
    a hard wall would force an asymmetric row at the faces.
    """
    _check_box(d, L)
    rng = philox(seed)
    coords = box_coords(d, L)
    N = len(coords)
    rates = 1.0 - rng.random((N, d))  # in (0, 1]
    half = rates / (2.0 * rates.sum(axis=1, keepdims=True))
    i, j, ax = box_edges(d, L, torus=True)
    # arc i -> j (the +e_axis neighbour) and j -> i (the -e_axis neighbour of j)
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([half[i, ax], half[j, ax]])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    P.sum_duplicates()
    P.sort_indices()
    meta = EnvMeta("balanced", d, L, int(seed), {})
    return RootedEnvironment(P, _nearest_origin(coords), meta, coords, None)


def sierpinski_count(level: int) -> int:
    return 3 * (3**level + 1) // 2


def gen_sierpinski(level: int) -> RootedEnvironment:
    """Level-``level`` graphical Sierpinski gasket, root at the apex corner.

    Built inside out: the level-(k+1) graph is three copies of level k glued
    pairwise at corners. Vertices live on the triangular lattice coordinates
    (i, j), i + j <= 2^level, which makes corner identification a dedup.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level > MAX_SIERPINSKI_LEVEL:
        raise ValueError(f"level {level} exceeds the memory budget ({MAX_SIERPINSKI_LEVEL})")
    a = np.array([[0, 0], [1, 0], [0, 0]], dtype=np.int64)
    b = np.array([[1, 0], [0, 1], [0, 1]], dtype=np.int64)
    for k in range(level):
        s = 1 << k
        shifts = np.array([[0, 0], [s, 0], [0, s]], dtype=np.int64)
        a = np.concatenate([a + t for t in shifts])
        b = np.concatenate([b + t for t in shifts])
    pts, inv = np.unique(np.concatenate([a, b]), axis=0, return_inverse=True)
    inv = inv.ravel()
    ei, ej = inv[: len(a)], inv[len(a):]
    W = weights_from_edges(len(pts), ei, ej, np.ones(ei.size))
    meta = EnvMeta("sierpinski", 0, 0, 0, {"level": int(level)})
    root = int(np.flatnonzero((pts[:, 0] == 0) & (pts[:, 1] == 0))[0])
    return RootedEnvironment(kernel_from_weights(W), root, meta, None, W)


def size_biased(pmf) -> np.ndarray:
    pmf = np.asarray(pmf, dtype=float)
    k = np.arange(pmf.size)
    return k * pmf / np.sum(k * pmf)


def check_critical(pmf) -> np.ndarray:
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0):
        raise ValueError("offspring law must be a finite nonnegative vector p_0..p_K")
    if abs(pmf.sum() - 1.0) > 1e-9:
        raise ValueError(f"offspring law sums to {pmf.sum()}, not 1")
    mean = float(np.dot(np.arange(pmf.size), pmf))
    if abs(mean - 1.0) > 1e-9:
        raise ValueError(f"offspring law has mean {mean}, not 1 (non-critical)")
    return pmf


def gen_kesten_tree(pmf, depth: int, seed: int) -> RootedEnvironment:
    """Critical Galton-Watson tree conditioned to survive, truncated at ``depth``.

    Spine construction: vertices 0..depth form the infinite ray, vertex k at
    distance k from the root. Each spine vertex has a size-biased number of
    children, one of which continues the spine; every other child starts an
    independent Galton-Watson tree with law ``pmf``.
    """
    pmf = check_critical(pmf)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = philox(seed)
    biased = size_biased(pmf)
    ks = np.arange(pmf.size)
    parent = list(range(-1, depth))  # spine: parent of k is k-1
    level = list(range(depth + 1))
    spine_offspring = rng.choice(ks, size=depth, p=biased)
    frontier = []
    for k in range(depth):
        for _ in range(int(spine_offspring[k]) - 1):
            parent.append(k)
            level.append(k + 1)
            frontier.append(len(parent) - 1)
    while frontier:
        live = [v for v in frontier if level[v] < depth]
        if not live:
            break
        counts = rng.choice(ks, size=len(live), p=pmf)
        frontier = []
        for v, c in zip(live, counts):
            for _ in range(int(c)):
                parent.append(v)
                level.append(level[v] + 1)
                frontier.append(len(parent) - 1)
    par = np.asarray(parent[1:], dtype=np.int64)
    child = np.arange(1, len(parent), dtype=np.int64)
    W = weights_from_edges(len(parent), par, child, np.ones(child.size))
    pmf_s = ";".join(repr(float(x)) for x in pmf)
    meta = EnvMeta("kesten", 0, int(depth), int(seed), {"pmf": pmf_s})
    return RootedEnvironment(kernel_from_weights(W), 0, meta, None, W)


def spine_offspring(env: RootedEnvironment) -> np.ndarray:
    """Children counts of the spine vertices 0..depth-1 of a Kesten tree."""
    depth = env.meta.L
    deg = env.out_degree[:depth].astype(np.int64)
    # every spine vertex but the root has one parent edge
    return deg - (np.arange(depth) > 0)
