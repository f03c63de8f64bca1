"""Zero-mean subspaces, the contraction lemma and Gram-determinant dimension probes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..checks import require
from ..environment import RootedEnvironment, ball
from .cover import BallCover, proper_cover
from .dirichlet import HarmonicField, dirichlet_solve_many, mean_value_residual
from .poincare import ball_mass, poincare_constant

RANK_RTOL = 1e-8
LEMMA_B_TOL = 1e-6
MEAN_TOL = 1e-10


def _dense(env: RootedEnvironment, f) -> np.ndarray:
    if isinstance(f, HarmonicField):
        return f.dense(env.n_vertices)
    return np.asarray(f, dtype=float)


def ball_means(env: RootedEnvironment, fields, cover: BallCover) -> np.ndarray:
    """M x d matrix of nu-weighted means of each field on each cover ball."""
    F = np.column_stack([_dense(env, f) for f in fields])
    out = np.empty((cover.count, F.shape[1]))
    for i, b in enumerate(cover.balls(env)):
        w = env.nu[b.members]
        vals = F[b.members]
        if np.any(np.isnan(vals)):
            raise ValueError("a field is undefined on a cover ball")
        out[i] = w @ vals / w.sum()
    return out


@dataclass(frozen=True, eq=False)
class ZeroMeanSubspace:
    coefficients: np.ndarray  # d x k, columns span the subspace in candidate coordinates
    fields: np.ndarray  # N x k dense fields, one column per basis element
    means: np.ndarray  # M x d ball means of the candidates

    @property
    def dim(self) -> int:
        return self.coefficients.shape[1]


def zero_mean_subspace(env: RootedEnvironment, fields, cover: BallCover,
                       rtol: float = 1e-10) -> ZeroMeanSubspace:
    """Combinations of ``fields`` with nu-mean zero on every cover ball.

    The null space of the mean matrix comes from a column-pivoted QR of its
    transpose: the trailing columns of Q beyond the numerical rank. Candidates
    are first scaled to unit nu-RMS over the covered region, so the rank cut
    is not fooled by fields that are tiny there but large further out.
    """
    F = np.column_stack([_dense(env, f) for f in fields])
    Mm = ball_means(env, fields, cover)
    d = F.shape[1]
    region = np.unique(np.concatenate([b.members for b in cover.balls(env)]))
    w = env.nu[region]
    rms = np.sqrt(w @ F[region] ** 2 / w.sum())
    rms[rms == 0] = 1.0
    Q, R, _ = sla.qr((Mm / rms).T, pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    C = Q[:, rank:d] / rms[:, None]
    return ZeroMeanSubspace(C, F @ C, Mm)


@dataclass(frozen=True)
class LemmaB:
    lhs: float
    rhs: float
    ratio: float
    eps: float
    overlap: int
    poincare: float
    cover_size: int


def check_lemma_b(env: RootedEnvironment, h, eps: float, n: int, root: int | None = None,
                  cover: BallCover | None = None, poincare: float | None = None,
                  tol: float = LEMMA_B_TOL) -> LemmaB:
    """sum_{B(n)} h^2 nu <= c eps^2 sum_{B(4n)} h^2 nu with c = 4 overlap C_P.

    ``h`` must be harmonic on B_root(4n - 1) and have nu-mean zero on every ball
    of an (eps n)-cover of B_root(n). C_P is the largest Poincare constant of
    the cover balls at radius eps n.
    """
    root = env.root if root is None else root
    r = int(round(eps * n))
    if r < 1 or 2 * r > n:
        raise ValueError("eps * n must be an integer radius in [1, n/2]")
    eps = r / n
    dense = _dense(env, h)
    big = ball(env, root, 4 * n)
    if np.any(np.isnan(dense[big.members])):
        raise ValueError(f"field undefined on B({4 * n})")
    scale = float(np.max(np.abs(dense[big.members]))) or 1.0
    if mean_value_residual(env, dense, big.inner) > 1e-9 * scale:
        raise ValueError(f"field is not harmonic on B({4 * n - 1})")
    cover = cover or proper_cover(env, root, n, r)
    means = ball_means(env, [dense], cover)
    if np.max(np.abs(means)) > MEAN_TOL * scale:
        raise ValueError("field does not have mean zero on every cover ball")
    if poincare is None:
        poincare = max(poincare_constant(env, int(y), r, tol=1e-12) for y in cover.centers)
    small = big.members[big.distance <= n]
    lhs = ball_mass(env, small, dense)
    c = 4.0 * cover.overlap * poincare
    rhs = c * eps**2 * ball_mass(env, big.members, dense)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    require("zero-mean contraction", 1.0 + tol - ratio, 0.0)
    return LemmaB(lhs, rhs, float(ratio), eps, cover.overlap, poincare, cover.count)


def gram(env: RootedEnvironment, F: np.ndarray, root: int, m: int) -> np.ndarray:
    """<f, g>_m = sum_{B_root(m)} f g nu for every pair of columns of F."""
    b = ball(env, root, m)
    X = F[b.members]
    if np.any(np.isnan(X)):
        raise ValueError(f"candidate undefined on B({m})")
    return X.T @ (X * env.nu[b.members, None])


def numerical_rank(G: np.ndarray, rtol: float = RANK_RTOL) -> tuple[int, np.ndarray]:
    s = np.linalg.svd(G, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.sum(s > rtol * s[0])), s


def hadamard_ratio(G: np.ndarray) -> float:
    """det G / prod G_ii, in [0, 1] for a Gram matrix (1 iff orthogonal)."""
    diag = np.diag(G)
    if np.any(diag <= 0):
        return 0.0
    Dm = 1.0 / np.sqrt(diag)
    return float(np.linalg.det(G * np.outer(Dm, Dm)))


@dataclass(frozen=True, eq=False)
class GramProbeReport:
    d: int
    n: int
    M: int | None
    det_n: float
    det_4n: float
    ratio: float
    hadamard_n: float
    rank_n: int
    rank_4n: int
    singular_n: np.ndarray
    singular_4n: np.ndarray
    threshold: float | None
    verdict: str


def gram_dimension_probe(env: RootedEnvironment, candidates, n: int, eps: float | None = None,
                         c: float | None = None, root: int | None = None) -> GramProbeReport:
    """Gram determinants at radii n and 4n, their ratio and numerical ranks.

    With ``eps`` and ``c`` (the contraction constant 4 overlap C_P) the report
    also carries the contraction threshold (c eps)^(d - M), M the size of the
    (eps n)-cover of B(n). The verdict is "dependent on B(n)" when the Gram
    matrix on B(n) is numerically singular, or its determinant ratio falls
    below that threshold; "independent" otherwise.
    """
    root = env.root if root is None else root
    F = np.column_stack([_dense(env, f) for f in candidates])
    d = F.shape[1]
    Gn, G4 = gram(env, F, root, n), gram(env, F, root, 4 * n)
    rn, sn = numerical_rank(Gn)
    r4, s4 = numerical_rank(G4)
    det_n, det_4 = float(np.linalg.det(Gn)), float(np.linalg.det(G4))
    ratio = det_n / det_4 if det_4 != 0 else float("nan")
    M = threshold = None
    if eps is not None:
        r = max(1, int(round(eps * n)))
        M = proper_cover(env, root, n, r).count
        if c is not None:
            threshold = (c * eps) ** max(d - M, 0)
    dependent = rn < d or (threshold is not None and ratio < threshold)
    return GramProbeReport(d, n, M, det_n, det_4, ratio, hadamard_ratio(Gn), rn, r4, sn, s4,
                           threshold, "dependent on B(n)" if dependent else "independent")


def dirichlet_candidates(env: RootedEnvironment, R: int, root: int | None = None,
                         tol: float = 1e-10) -> list[HarmonicField]:
    """Harmonic extensions into B_root(R) of the boundary data 1, x_1, ..., x_d."""
    if env.coords is None:
        raise ValueError("candidates need a lattice-embedded environment")
    root = env.root if root is None else root
    b = ball(env, root, R)
    X = (env.coords - env.coords[root]).astype(float)
    G = np.column_stack([np.ones(env.n_vertices), X])
    return dirichlet_solve_many(env, b, G, tol=tol)
