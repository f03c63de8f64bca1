"""Heat-kernel gradients, the gradient lemma and Gaussian-estimate fits."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .checks import require
from .entropy import delta
from .environment import RootedEnvironment, ball, distances
from .models import Ensemble, ModelSpec, ensemble, parallel_map, weighted_mean
from .walk import trajectory

GRADIENT_TOL = 1e-12


def _laws(env: RootedEnvironment, starts, steps) -> dict:
    """law(X_t | X_0 = s) for each requested (start index, t)."""
    wanted = {}
    for k, t in steps:
        wanted.setdefault(t, []).append(k)
    out = {}
    n_max = max(wanted)
    M = np.zeros((env.n_vertices, len(starts)))
    M[np.asarray(starts), np.arange(len(starts))] = 1.0
    for t in range(n_max + 1):
        for k in wanted.get(t, ()):
            out[(k, t)] = M[:, k].copy()
        if t < n_max:
            M = env.kernel_t @ M
    return out


def gradient_squared(env: RootedEnvironment, x: int, xp: int, y: int, two_n: int) -> float:
    """(p_{2n}(x, y) - p_{2n-1}(x', y))^2 by exact propagation."""
    if two_n < 2 or two_n % 2:
        raise ValueError("two_n must be a positive even integer")
    laws = _laws(env, [x, xp], [(0, two_n), (1, two_n - 1)])
    return float((laws[(0, two_n)][y] - laws[(1, two_n - 1)][y]) ** 2)


@dataclass(frozen=True, eq=False)
class BallKernel:
    """p_n(a, b) and d(a, b) for all a, b in B_x(2n) with p_n(a, b) > 0."""

    x: int
    n: int
    members: np.ndarray
    p: np.ndarray  # values p_n(a, b) over the stored pairs
    dist: np.ndarray  # d(a, b) over the same pairs

    @property
    def max_all(self) -> float:
        return float(self.p.max()) if self.p.size else 0.0

    def max_far(self, D: float) -> float:
        """max p_n(a, b) over stored pairs with d(a, b) >= D / 2."""
        sel = self.dist >= D / 2.0
        return float(self.p[sel].max()) if np.any(sel) else 0.0


def ball_kernel(env: RootedEnvironment, x: int, n: int) -> BallKernel:
    """Exhaustive p_n on B_x(2n) x B_x(2n) via sparse powers of the restricted rows.

    d(a, b) is the first power at which the (a, b) entry becomes positive.
    """
    b = ball(env, x, 2 * n)
    rows = b.members
    m = rows.size
    S = sp.csr_matrix((np.ones(m), (np.arange(m), rows)), shape=(m, env.n_vertices))
    seen = S.astype(bool)
    dist = sp.csr_matrix(S.shape)
    for k in range(1, n + 1):
        S = (S @ env.kernel).tocsr()
        pat = S.astype(bool)
        new = pat > pat.multiply(seen)
        if new.nnz:
            dist = dist + sp.csr_matrix(new, dtype=float) * float(k)
        seen = (seen + pat).astype(bool)
    in_ball = np.zeros(env.n_vertices, dtype=bool)
    in_ball[rows] = True
    S = S.tocoo()
    keep = in_ball[S.col] & (S.data > 0)
    a_idx, b_col, vals = S.row[keep], S.col[keep], S.data[keep]
    # pairs never newly hit are a == b, at distance 0
    d = np.asarray(dist.tocsr()[a_idx, b_col]).ravel()
    return BallKernel(int(x), int(n), rows, vals, d)


@dataclass(frozen=True)
class GradientLemma:
    lhs: float
    rhs: float
    slack: float
    delta_n: float
    max_far: float
    max_all: float


def check_gradient_lemma(env: RootedEnvironment, x: int, xp: int, y: int, n: int,
                         d_max: int | None = None, bk: BallKernel | None = None,
                         tol: float = GRADIENT_TOL) -> GradientLemma:
    """(p_2n(x,y) - p_{2n-1}(x',y))^2 <= 4 d(d+1) Delta_n(x,x')^2 max_far max_all.

    Valid for the simple random walk on a graph of maximal degree d; the maxima
    are exhaustive over B_x(2n).
    """
    if env.kernel[x, xp] <= 0:
        raise ValueError("x' must be a neighbour of x")
    d_max = env.max_degree if d_max is None else d_max
    laws = _laws(env, [x, xp], [(0, n), (1, n - 1), (0, 2 * n), (1, 2 * n - 1)])
    lhs = float((laws[(0, 2 * n)][y] - laws[(1, 2 * n - 1)][y]) ** 2)
    dn = delta(laws[(0, n)], laws[(1, n - 1)])
    bk = bk if bk is not None else ball_kernel(env, x, n)
    D = float(distances(env, x)[y])
    if D < 0:
        raise ValueError("y is not reachable from x")
    far, full = bk.max_far(D), bk.max_all
    rhs = 4.0 * d_max * (d_max + 1) * dn**2 * far * full
    slack = rhs - lhs
    require("gradient lemma", slack, tol)
    return GradientLemma(lhs, rhs, float(slack), dn, far, full)


def ols(x, y) -> tuple[float, float, float]:
    """Slope, intercept and R^2 of an ordinary least-squares line."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ [slope, icpt]
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


@dataclass(frozen=True, eq=False)
class GaussianFitReport:
    n: np.ndarray
    diagonal: np.ndarray  # annealed p_n(x,x) + p_{n+1}(x,x)
    slope: float
    intercept: float
    profile_C: float | None  # C in C n^{-d/2} exp(-c |x-y|^2 / n)
    profile_c: float | None
    profile_r2: float | None
    onsets: list = field(default_factory=list)  # first n inside the fitted band, None if never

    def onset_summary(self) -> dict:
        known = np.array([o for o in self.onsets if o is not None], dtype=float)
        out = {"starts": len(self.onsets), "flagged": sum(o is None for o in self.onsets)}
        if known.size:
            out.update(median=float(np.median(known)), max=float(known.max()),
                       tail={int(s): float(np.mean(known >= s)) for s in np.unique(known)})
        return out


def _onset(ns, values, envelope, band) -> int | None:
    inside = (values <= band * envelope) & (values >= envelope / band)
    if not inside[-1]:
        return None
    k = len(inside) - 1
    while k > 0 and inside[k - 1]:
        k -= 1
    return int(ns[k])


def fit_gaussian(model: ModelSpec | Ensemble, n_range, starts=None, replicas: int = 1,
                 master_seed: int = 0, profile_n=None, band: float = 2.0,
                 threads: int = 1) -> GaussianFitReport:
    """Least-squares fits of the parity-summed kernel p_n + p_{n+1}.

    Diagonal: log p vs log n, annealed over environments. Profile (embedded
    models): log[(p_n + p_{n+1}) n^{d/2}] vs |x - y|^2 / n for |x - y| <= 3 sqrt(n)
    at the largest n of the range, or at ``profile_n``. ``starts`` maps an
    environment to its start vertices (default: the root).
    """
    ns = np.array(sorted(set(int(n) for n in n_range)))
    if ns.size < 4 or ns[0] < 1:
        raise ValueError("need at least four positive horizons to fit")
    ens = model if isinstance(model, Ensemble) else ensemble(model, replicas, master_seed, threads)
    pn = int(ns[-1]) if profile_n is None else int(profile_n)
    n_top = max(int(ns[-1]), pn) + 1

    def one(env):
        xs = np.atleast_1d([env.root] if starts is None else starts(env)).astype(np.int64)
        diag = np.zeros((xs.size, ns.size))
        prof = None
        last = None
        for t, M in trajectory(env, xs, n_top):
            if last is not None:
                pair = last + M
                hit = np.flatnonzero(ns == t - 1)
                if hit.size:
                    diag[:, hit[0]] = pair[xs, np.arange(xs.size)]
                if t - 1 == pn and env.coords is not None:
                    prof = pair[:, 0].copy()
            last = M.copy()
        return diag, prof

    results = parallel_map(one, ens.envs, threads)
    per_env = np.array([r[0][0] for r in results])
    diagonal = np.array([weighted_mean(per_env[:, j], ens.weights)[0] for j in range(ns.size)])
    slope, icpt, _ = ols(np.log(ns), np.log(diagonal))
    envelope = np.exp(icpt) * ns.astype(float) ** slope
    onsets = [_onset(ns, row, envelope, band) for r in results for row in r[0]]
    C = c = r2 = None
    env0 = ens.envs[0]
    if results[0][1] is not None:
        d = env0.meta.d
        xs, ys = [], []
        for env, (_, prof) in zip(ens.envs, results):
            r2d = np.sum((env.coords - env.coords[env.root]).astype(float) ** 2, axis=1)
            sel = (r2d <= 9.0 * pn) & (prof > 0)
            xs.append(r2d[sel] / pn)
            ys.append(np.log(prof[sel] * pn ** (d / 2.0)))
        s, i, r2 = ols(np.concatenate(xs), np.concatenate(ys))
        C, c = float(np.exp(i)), float(-s)
    return GaussianFitReport(ns, diagonal, slope, icpt, C, c, r2, onsets)


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    rows: list  # (n, scale, |x - y|, estimate, stderr)
    exponents: dict  # scale -> fitted exponent of estimate vs n
    C3: float
    C4: float
    d: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "|x-y|", "estimate", "stderr", "C3", "C4", "exponent"])
        for n, s, dist, est, se in self.rows:
            w.writerow([n, "%.12g" % dist, "%.12g" % est, "%.12g" % se, "%.12g" % self.C3,
                        "%.12g" % self.C4, "%.12g" % self.exponents[s]])
        return buf.getvalue()


def _parity_offset(n: int, s: float) -> int:
    """Integer k closest to s sqrt(n) with k + n even."""
    k = int(round(s * np.sqrt(n)))
    if (k + n) % 2:
        k += 1 if s * np.sqrt(n) >= k else -1
    return abs(k)


def annealed_gradient_estimate(model: ModelSpec | Ensemble, n_list, scales=(1.0,),
                               replicas: int = 1, master_seed: int = 0,
                               threads: int = 1) -> GradientEstimate:
    """E[sum_x' P(root, x') (p_n(root, y) - p_{n-1}(x', y))^2 1{y in cluster}].

    y = root + k e_1 with k the integer of the parity of n nearest s sqrt(n),
    one row per (n, s). Environments where y is missing contribute zero.
    Exponents are OLS slopes of log estimate vs log n per scale; C3, C4 come
    from log(estimate n^{d+1}) = log C3 - C4 |x - y|^2 / n over rows with
    s >= 1 (the gradient vanishes near y = x, so smaller scales bend the profile).
    """
    ns = sorted(int(n) for n in n_list)
    if any(n < 2 for n in ns):
        raise ValueError("horizons must be >= 2")
    ens = model if isinstance(model, Ensemble) else ensemble(model, replicas, master_seed, threads)
    scales = tuple(float(s) for s in scales)
    d = ens.envs[0].meta.d

    def one(env):
        if env.coords is None:
            raise ValueError("gradient estimate needs a lattice-embedded model")
        nbrs, probs = env.neighbors(env.root)
        starts = np.concatenate([[env.root], nbrs])
        e1 = np.zeros(env.coords.shape[1], dtype=np.int64)
        e1[0] = 1
        targets = {}
        for n in ns:
            for s in scales:
                k = _parity_offset(n, s)
                targets[(n, s)] = env.vertex_at(env.coords[env.root] + k * e1)
        out = {}
        want = set(ns)
        prev = None
        for t, M in trajectory(env, starts, max(ns)):
            if t in want:
                for s in scales:
                    y = targets[(t, s)]
                    if y is None:
                        out[(t, s)] = 0.0
                        continue
                    g = (M[y, 0] - prev[y, 1:]) ** 2
                    out[(t, s)] = float(probs @ g)
            prev = M.copy()
        return out

    per_env = parallel_map(one, ens.envs, threads)
    rows = []
    fit_x, fit_y = [], []
    exps = {}
    for s in scales:
        ests = []
        for n in ns:
            vals = [r[(n, s)] for r in per_env]
            m, se = weighted_mean(vals, ens.weights)
            k = _parity_offset(n, s)
            rows.append((n, s, float(k), m, se))
            ests.append(m)
            if m > 0 and s >= 1.0:
                fit_x.append(k**2 / n)
                fit_y.append(np.log(m * n ** (d + 1)))
        ests = np.array(ests)
        pos = ests > 0
        exps[s] = ols(np.log(np.array(ns)[pos]), np.log(ests[pos]))[0] if pos.sum() >= 2 else float("nan")
    rows.sort(key=lambda r: (r[0], r[1]))
    if len(set(fit_x)) >= 2:
        slope, icpt, _ = ols(fit_x, fit_y)
        C3, C4 = float(np.exp(icpt)), float(-slope)
    else:
        C3, C4 = float(np.exp(np.mean(fit_y))) if fit_y else float("nan"), float("nan")
    return GradientEstimate(rows, exps, C3, C4, d)
