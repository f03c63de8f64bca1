"""Reverse Poincare, Poincare and volume-doubling quantities on weighted balls."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from ..checks import require
from ..environment import RootedEnvironment, ball
from .dirichlet import HarmonicField, mean_value_residual

REVERSE_TOL = 1e-9
POWER_TOL = 1e-6
HARMONIC_TOL = 1e-9


def _need_weights(env: RootedEnvironment) -> None:
    if not env.reversible:
        raise ValueError("this quantity needs a weighted (reversible) environment")


def edge_energy(env: RootedEnvironment, h: np.ndarray, members: np.ndarray) -> float:
    """sum over undirected edges with both ends in ``members`` of (h(z) - h(y))^2 nu(y, z)."""
    W = sp.triu(env.weights[members][:, members], k=1).tocoo()
    hm = h[members]
    return float(np.sum(W.data * (hm[W.row] - hm[W.col]) ** 2))


def ball_mass(env: RootedEnvironment, members: np.ndarray, h: np.ndarray | None = None) -> float:
    """sum_y nu(y) over the members, or sum_y h(y)^2 nu(y) when ``h`` is given."""
    if h is None:
        return float(env.nu[members].sum())
    return float(np.sum(h[members] ** 2 * env.nu[members]))


@dataclass(frozen=True)
class ReversePoincare:
    lhs: float
    rhs: float
    ratio: float


def check_reverse_poincare(env: RootedEnvironment, h, x: int, n: int,
                           tol: float = REVERSE_TOL) -> ReversePoincare:
    """Edge energy of h on B_x(n) against (4 / n^2) sum_{B_x(2n)} h^2 nu.

    ``h`` is a HarmonicField or a dense array; it must be harmonic on B_x(2n - 1),
    which is verified here rather than trusted.
    """
    _need_weights(env)
    if n < 1:
        raise ValueError("n must be >= 1")
    dense = h.dense(env.n_vertices) if isinstance(h, HarmonicField) else np.asarray(h, float)
    big = ball(env, x, 2 * n)
    if np.any(np.isnan(dense[big.members])):
        raise ValueError(f"field is not defined on B_x({2 * n})")
    res = mean_value_residual(env, dense, big.inner)
    scale = float(np.nanmax(np.abs(dense[big.members]))) or 1.0
    if res > HARMONIC_TOL * scale:
        raise ValueError(f"field is not harmonic on B_x({2 * n - 1}): residual {res:.3e}")
    small = big.members[big.distance <= n]
    lhs = edge_energy(env, dense, small)
    rhs = 4.0 / n**2 * ball_mass(env, big.members, dense)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    require("reverse Poincare", 1.0 + tol - ratio, 0.0)
    return ReversePoincare(lhs, rhs, float(ratio))


def _pencil(env: RootedEnvironment, x: int, n: int):
    """Variance form on B_x(n) and edge-energy Laplacian on B_x(2n), indexed by B_x(2n)."""
    big = ball(env, x, 2 * n)
    members = big.members
    inner = (big.distance <= n).astype(float)
    nu = env.nu[members] * inner
    Wb = env.weights[members][:, members]
    Wb = Wb - sp.diags(Wb.diagonal())
    Lap = (sp.diags(np.asarray(Wb.sum(axis=1)).ravel()) - Wb).tocsc()
    return big, nu, Lap


def _variance_form(nu: np.ndarray, f: np.ndarray) -> np.ndarray:
    """A f with A = diag(nu) - nu nu^T / nu(B)."""
    return nu * f - nu * (nu @ f) / nu.sum()


def poincare_constant(env: RootedEnvironment, x: int, n: int, tol: float = POWER_TOL,
                      max_iter: int = 100_000) -> float:
    """Smallest C with sum_{B_x(n)} (f - mean)^2 nu <= C n^2 energy_{B_x(2n)}(f) for all f.

    Power iteration on L^+ A, L the edge Laplacian of B_x(2n) grounded at x and
    A the nu-weighted centred mass on B_x(n). Returns inf if B_x(2n) is not
    connected through its own edges.
    """
    _need_weights(env)
    if n < 1:
        raise ValueError("n must be >= 1")
    big, nu, Lap = _pencil(env, x, n)
    m = big.members.size
    if m < 2:
        return 0.0
    if connected_components(Lap, directed=False)[0] > 1:
        return float("inf")
    ground = int(np.searchsorted(big.members, x))
    keep = np.flatnonzero(np.arange(m) != ground)
    lu = spla.splu(Lap[keep][:, keep].tocsc())

    def apply(f):
        b = _variance_form(nu, f)
        u = np.zeros(m)
        u[keep] = lu.solve(b[keep])
        return u

    rng = np.random.Generator(np.random.Philox(key=m))
    v = big.distance.astype(float) + 0.1 * rng.standard_normal(m)
    lam = 0.0
    for _ in range(max_iter):
        w = apply(v)
        num = float(w @ _variance_form(nu, w))
        den = float(w @ (Lap @ w))
        if den <= 0:
            return 0.0
        new = num / den
        v = w / np.linalg.norm(w)
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    return lam / n**2


def poincare_pencil_dense(env: RootedEnvironment, x: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense (A, L) pair behind poincare_constant, for cross-checks."""
    big, nu, Lap = _pencil(env, x, n)
    A = np.diag(nu) - np.outer(nu, nu) / nu.sum()
    return A, Lap.toarray()


@dataclass(frozen=True)
class DoublingReport:
    n: int
    ratios: np.ndarray  # nu(B_x(2n)) / nu(B_x(n)) per centre

    @property
    def max(self) -> float:
        return float(self.ratios.max())


def volume_doubling(env: RootedEnvironment, centers, n: int) -> DoublingReport:
    """nu(B_x(2n)) / nu(B_x(n)), nu(B) the summed vertex weights of the ball."""
    out = []
    for x in np.atleast_1d(centers):
        big = ball(env, int(x), 2 * n)
        small = big.members[big.distance <= n]
        out.append(ball_mass(env, big.members) / ball_mass(env, small))
    return DoublingReport(n, np.array(out))
