"""Discrete Dirichlet problems on metric balls."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..environment import BallView, RootedEnvironment

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 1_000_000
DIRECT_LIMIT = 400_000


class DirichletError(RuntimeError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (final residual {residual:.3e})")


@dataclass(frozen=True, eq=False)
class HarmonicField:
    """Values on a ball, harmonic on ``interior`` up to ``residual``.

    ``values`` is aligned with ``ball.members``; ``interior`` is a boolean mask
    over the same members.
    """

    ball: BallView
    values: np.ndarray
    interior: np.ndarray
    residual: float

    def dense(self, n: int, fill: float = np.nan) -> np.ndarray:
        out = np.full(n, fill)
        out[self.ball.members] = self.values
        return out


def mean_value_residual(env: RootedEnvironment, h: np.ndarray, at: np.ndarray) -> float:
    """max over ``at`` of |h(x) - sum_y P(x, y) h(y)| for a dense field ``h``."""
    if at.size == 0:
        return 0.0
    Ph = env.kernel[at] @ np.where(np.isnan(h), 0.0, h)
    touched = env.kernel[at] @ np.isnan(h).astype(float)
    if np.any(touched > 0):
        raise ValueError("field undefined on a neighbour of a vertex where harmonicity is checked")
    return float(np.max(np.abs(h[at] - Ph)))


def _boundary_values(env, ball: BallView, g) -> np.ndarray:
    """Boundary data as a (len(boundary), k) array."""
    bnd = ball.boundary
    if callable(g):
        vals = np.array([g(int(v)) for v in bnd], dtype=float)
    elif isinstance(g, dict):
        vals = np.array([g[int(v)] for v in bnd], dtype=float)
    else:
        arr = np.asarray(g, dtype=float)
        if arr.shape[0] == env.n_vertices:
            vals = arr[bnd]
        elif arr.shape[0] == bnd.size:
            vals = arr
        else:
            raise ValueError("boundary data must cover the boundary or every vertex")
    return vals.reshape(bnd.size, -1)


def _system(env: RootedEnvironment, ball: BallView):
    """Interior operator and boundary coupling; symmetric form when weights exist."""
    I, B = ball.inner, ball.boundary
    if env.reversible:
        W = env.weights
        A = sp.diags(env.nu[I]) - W[I][:, I]
        C = W[I][:, B]
        return A.tocsc(), C.tocsr(), True
    P = env.kernel
    A = sp.identity(I.size, format="csr") - P[I][:, I]
    return A.tocsc(), P[I][:, B].tocsr(), False


def _fixed_point(env, ball, hb, tol, sweeps, damping=0.5):
    """Damped sweeps h <- (1 - w) h + w P h on the interior."""
    I, B = ball.inner, ball.boundary
    PI, PB = env.kernel[I][:, I], env.kernel[I][:, B] @ hb
    h = np.zeros((I.size, hb.shape[1]))
    for _ in range(sweeps):
        new = PI @ h + PB
        res = float(np.max(np.abs(new - h))) if h.size else 0.0
        h = (1 - damping) * h + damping * new
        if res <= tol:
            return h, res
    return h, res


def dirichlet_solve_many(env: RootedEnvironment, ball: BallView, G, tol: float = DEFAULT_TOL,
                         method: str = "auto") -> list[HarmonicField]:
    """Solve one Dirichlet problem per column of the boundary data ``G``.

    ``method`` is ``direct`` (sparse LU), ``krylov`` (CG on the symmetric form,
    GMRES otherwise), ``fixed_point`` (damped sweeps escalating to Krylov) or
    ``auto`` (direct below ``DIRECT_LIMIT`` unknowns, Krylov above).
    """
    if ball.boundary.size == 0:
        raise ValueError("ball has an empty boundary: the walk cannot reach distance r")
    hb = _boundary_values(env, ball, G)
    I = ball.inner
    if method == "auto":
        method = "direct" if I.size <= DIRECT_LIMIT else "krylov"
    if I.size == 0:
        hi = np.zeros((0, hb.shape[1]))
    else:
        A, C, symmetric = _system(env, ball)
        rhs = C @ hb
        if method == "fixed_point":
            scale = max(1.0, float(np.max(np.abs(hb))))
            hi, res = _fixed_point(env, ball, hb, tol * scale * 1e-2, sweeps=min(MAX_SWEEPS, 2000))
            if res > tol * scale * 1e-2:
                method = "krylov"
        if method == "direct":
            lu = spla.splu(A)
            hi = lu.solve(rhs)
            # one step of iterative refinement
            hi = hi + lu.solve(rhs - A @ hi)
        elif method == "krylov":
            hi = np.empty((I.size, hb.shape[1]))
            diag = A.diagonal()
            M = sp.diags(1.0 / diag)
            for k in range(hb.shape[1]):
                b = rhs[:, k]
                bn = max(np.linalg.norm(b), 1e-300)
                if symmetric:
                    x, info = spla.cg(A, b, rtol=1e-14, atol=0.0, maxiter=MAX_SWEEPS, M=M)
                else:
                    x, info = spla.gmres(A, b, rtol=1e-14, atol=0.0, restart=200,
                                         maxiter=MAX_SWEEPS // 200, M=M)
                if info != 0:
                    raise DirichletError("Krylov solver did not converge",
                                         float(np.linalg.norm(A @ x - b) / bn))
                hi[:, k] = x
        elif method != "fixed_point":
            raise ValueError(f"unknown method {method!r}")
    fields = []
    inner_mask = ball.distance < ball.radius
    for k in range(hb.shape[1]):
        vals = np.empty(ball.members.size)
        vals[inner_mask] = hi[:, k]
        vals[~inner_mask] = hb[:, k]
        dense = np.full(env.n_vertices, np.nan)
        dense[ball.members] = vals
        res = mean_value_residual(env, dense, I)
        scale = float(np.max(np.abs(vals))) or 1.0
        if res > tol * scale:
            raise DirichletError("mean-value residual above tolerance", res)
        fields.append(HarmonicField(ball, vals, inner_mask, res))
    return fields


def dirichlet_solve(env: RootedEnvironment, ball: BallView, g, tol: float = DEFAULT_TOL,
                    method: str = "auto") -> HarmonicField:
    fields = dirichlet_solve_many(env, ball, g, tol, method)
    if len(fields) != 1:
        raise ValueError("use dirichlet_solve_many for several boundary data")
    return fields[0]
