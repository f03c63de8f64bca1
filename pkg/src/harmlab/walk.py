"""Exact propagation of walk laws and Monte Carlo path sampling."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .environment import RootedEnvironment, distances
from .models import Ensemble, ModelSpec, ensemble, parallel_map, weighted_mean
from .rng import philox

DROP_BELOW = 1e-300
MASS_TOL = 1e-10
EXACT_LIMIT = 5_000_000


@dataclass(eq=False)
class DistributionVector:
    """Law of the walk over the vertices of one environment (dense storage).

    ``dropped`` accumulates mass discarded below ``DROP_BELOW``.
    """

    mass: np.ndarray
    dropped: float = 0.0

    @classmethod
    def point(cls, env: RootedEnvironment, x: int) -> "DistributionVector":
        m = np.zeros(env.n_vertices)
        m[x] = 1.0
        return cls(m)

    @classmethod
    def from_dict(cls, env: RootedEnvironment, masses: dict) -> "DistributionVector":
        m = np.zeros(env.n_vertices)
        for v, p in masses.items():
            m[v] = p
        return cls(m).check()

    @property
    def support(self) -> dict:
        nz = np.flatnonzero(self.mass)
        return {int(v): float(self.mass[v]) for v in nz}

    def total(self) -> float:
        return float(self.mass.sum())

    def __getitem__(self, v) -> float:
        return float(self.mass[v])

    def check(self) -> "DistributionVector":
        if np.any(self.mass < 0):
            raise ValueError("negative mass")
        if abs(self.total() - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {self.total()!r} differs from 1")
        return self

    def dump(self, env: RootedEnvironment, n: int) -> str:
        lines = [f"dist env_hash={env_hash(env)} n={n}"]
        lines += [f"p {v} {p:.17g}" for v, p in self.support.items()]
        return "\n".join(lines) + "\n"


def env_hash(env: RootedEnvironment) -> str:
    h = hashlib.sha256()
    for arr in (env.kernel.indptr, env.kernel.indices, env.kernel.data):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(str(env.root).encode())
    return h.hexdigest()[:16]


def _step(env: RootedEnvironment, m: np.ndarray) -> tuple[np.ndarray, float]:
    m = env.kernel_t @ m
    tiny = (m != 0) & (np.abs(m) < DROP_BELOW)
    dropped = 0.0
    if tiny.any():
        dropped = float(m[tiny].sum())
        m[tiny] = 0.0
    return m, dropped


def propagate(env: RootedEnvironment, mu: DistributionVector, steps: int) -> DistributionVector:
    """mu P^steps; no renormalisation, so total-mass drift stays visible."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    env.check_horizon(steps)
    m = mu.mass.copy()
    dropped = mu.dropped
    for _ in range(steps):
        m, dr = _step(env, m)
        dropped += dr
    return DistributionVector(m, dropped)


def trajectory(env: RootedEnvironment, starts, n_max: int):
    """Yield ``(t, M_t)`` for t = 0..n_max, column k of M_t being law(X_t | X_0 = starts[k]).

    ``starts`` may also be an (N, k) array of initial laws.
    """
    env.check_horizon(n_max)
    starts = np.asarray(starts)
    if starts.ndim == 1 and starts.dtype.kind in "iu":
        M = np.zeros((env.n_vertices, starts.size))
        M[starts, np.arange(starts.size)] = 1.0
    else:
        M = np.array(starts, dtype=float).reshape(env.n_vertices, -1)
    yield 0, M
    for t in range(1, n_max + 1):
        M = env.kernel_t @ M
        M[np.abs(M) < DROP_BELOW] = 0.0
        yield t, M


def heat_kernel(env: RootedEnvironment, x: int, y: int, n: int) -> float:
    """p_n(x, y) = P_x(X_n = y)."""
    return propagate(env, DistributionVector.point(env, x), n)[y]


def heat_kernel_row(env: RootedEnvironment, x: int, n: int) -> np.ndarray:
    return propagate(env, DistributionVector.point(env, x), n).mass


@dataclass(frozen=True, eq=False)
class WalkSample:
    path: np.ndarray
    seed: int


def _row_cdf(env: RootedEnvironment) -> np.ndarray:
    P = env.kernel
    cdf = np.empty_like(P.data)
    for x in range(P.shape[0]):
        lo, hi = P.indptr[x], P.indptr[x + 1]
        cdf[lo:hi] = np.cumsum(P.data[lo:hi])
    return cdf


def sample_paths(env: RootedEnvironment, start: int, n: int, count: int, stream: int) -> np.ndarray:
    """``count`` independent paths of length n, shape (count, n + 1).

    Each step inverts the CDF of the kernel row, taken in increasing vertex order.
    """
    rng = philox(stream)
    P = env.kernel
    cdf = _row_cdf(env)
    paths = np.empty((count, n + 1), dtype=np.int64)
    paths[:, 0] = start
    cur = np.full(count, start, dtype=np.int64)
    for t in range(1, n + 1):
        lo, hi = P.indptr[cur], P.indptr[cur + 1]
        u = rng.random(count) * cdf[hi - 1]
        k = lo.copy()
        # branch-free search within rows of at most max_degree arcs
        for _ in range(env.max_degree - 1):
            adv = (k < hi - 1) & (cdf[k] <= u)
            k += adv
        cur = P.indices[k]
        paths[:, t] = cur
    return paths


def sample_path(env: RootedEnvironment, start: int, n: int, stream: int) -> WalkSample:
    return WalkSample(sample_paths(env, start, n, 1, stream)[0], stream)


def _squared_distance(env: RootedEnvironment, metric: str) -> np.ndarray:
    if metric == "graph":
        d = distances(env, env.root).astype(float)
        d[d < 0] = np.inf
        return d**2
    if metric == "euclidean":
        if env.coords is None:
            raise ValueError("euclidean metric needs lattice coordinates")
        diff = env.coords - env.coords[env.root]
        return np.sum(diff.astype(float) ** 2, axis=1)
    raise ValueError(f"unknown metric {metric!r}")


def quenched_displacement(env: RootedEnvironment, n_max: int, metric: str = "graph",
                          paths: int = 20000, stream: int = 0) -> np.ndarray:
    """E_root[d(root, X_n)^2] for n = 0..n_max on one environment."""
    d2 = _squared_distance(env, metric)
    if env.n_vertices <= EXACT_LIMIT:
        out = np.empty(n_max + 1)
        for t, M in trajectory(env, [env.root], n_max):
            out[t] = float(d2 @ M[:, 0])
        return out
    P = sample_paths(env, env.root, n_max, paths, stream)
    return d2[P].mean(axis=0)


@dataclass(frozen=True)
class ProfileRow:
    n: int
    mean: float
    stderr: float


def displacement_profile(model: ModelSpec | Ensemble, n_max: int, replicas: int = 1,
                         master_seed: int = 0, metric: str = "graph",
                         threads: int = 1) -> list[ProfileRow]:
    """Annealed E[d(root, X_n)^2] for n = 0..n_max with stationarity weights."""
    ens = model if isinstance(model, Ensemble) else ensemble(model, replicas, master_seed, threads)
    per_env = parallel_map(lambda e: quenched_displacement(e, n_max, metric), ens.envs, threads)
    table = np.array(per_env)
    rows = []
    for t in range(n_max + 1):
        m, se = weighted_mean(table[:, t], ens.weights)
        rows.append(ProfileRow(t, m, se))
    return rows
