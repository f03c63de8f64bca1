"""Walk entropies, the Delta distance and the entropy inequalities."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .checks import require
from .environment import RootedEnvironment
from .models import Ensemble, ModelSpec, ensemble, parallel_map, weighted_mean
from .walk import DistributionVector, trajectory

TV_TOL = 1e-12
MEAN_TOL = 1e-10
XY_TOL = 1e-10


def _arr(mu) -> np.ndarray:
    if isinstance(mu, DistributionVector):
        return mu.mass
    if isinstance(mu, JointTable):
        return mu.q.ravel()
    return np.asarray(mu, dtype=float)


def entropy(mu) -> float:
    """Shannon entropy in nats, sum of -t log t with 0 log 0 = 0."""
    p = _arr(mu)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def delta(mu, nu) -> float:
    """[sum (mu - nu)^2 / (mu + nu)]^(1/2), skipping atoms where both vanish."""
    a, b = _arr(mu), _arr(nu)
    s = a + b
    keep = s > 0
    return float(np.sqrt(np.sum((a[keep] - b[keep]) ** 2 / s[keep])))


def _delta_cols(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Delta between the vector ``a`` and every column of ``B``."""
    S = a[:, None] + B
    D = (a[:, None] - B) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        R = np.where(S > 0, D / np.where(S > 0, S, 1.0), 0.0)
    return np.sqrt(R.sum(axis=0))


def check_tv_delta(mu, nu) -> tuple[float, float, float]:
    """(TV, Delta, sqrt(2) Delta - TV), with TV the undivided sum of |mu - nu|."""
    a, b = _arr(mu), _arr(nu)
    tv = float(np.sum(np.abs(a - b)))
    dl = delta(a, b)
    slack = np.sqrt(2.0) * dl - tv
    require("TV <= sqrt(2) Delta", slack, TV_TOL)
    return tv, dl, float(slack)


def check_mean_inequality(mu, nu, f) -> float:
    """Delta(mu, nu) (mu(f^2) + nu(f^2))^(1/2) - |mu(f) - nu(f)|."""
    a, b, f = _arr(mu), _arr(nu), np.asarray(f, dtype=float)
    gap = abs(float(a @ f - b @ f))
    bound = delta(a, b) * np.sqrt(float(a @ f**2 + b @ f**2))
    slack = float(bound - gap)
    require("mean inequality", slack, MEAN_TOL)
    return slack


def delta_n(env: RootedEnvironment, x: int, y: int, n: int) -> float:
    """Delta(law(X_n | X_0 = x), law(X_{n-1} | X_0 = y)); not symmetric in x, y."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cols = {}
    for t, M in trajectory(env, [x, y], n):
        if t == n - 1:
            cols["y"] = M[:, 1].copy()
        if t == n:
            cols["x"] = M[:, 0]
    return delta(cols["x"], cols["y"])


@dataclass(frozen=True, eq=False)
class JointTable:
    """Joint law q(x, y) of two discrete variables (rows x, columns y)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2 or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-10:
            raise ValueError("joint table must be a nonnegative matrix summing to 1")
        object.__setattr__(self, "q", q)

    @property
    def px(self) -> np.ndarray:
        return self.q.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.q.sum(axis=0)


def check_lemma_xy(q: JointTable | np.ndarray) -> tuple[float, float, float]:
    """sum_y p(y) Delta^2(law X, law X | Y=y) against 2 (H(X) + H(Y) - H(X, Y))."""
    if not isinstance(q, JointTable):
        q = JointTable(q)
    px, py = q.px, q.py
    lhs = 0.0
    for j in np.flatnonzero(py > 0):
        lhs += py[j] * delta(px, q.q[:, j] / py[j]) ** 2
    rhs = 2.0 * (entropy(px) + entropy(py) - entropy(q))
    slack = rhs - lhs
    require("Lemma XY", slack, XY_TOL)
    return float(lhs), float(rhs), float(slack)


@dataclass(frozen=True)
class QuenchedEntropy:
    """Per-environment entropy data for n = 0..n_max."""

    H: np.ndarray  # H_n
    H1n: np.ndarray  # joint entropy of (X_1, X_n); H1n[0] is unused (nan)
    dsq: np.ndarray  # E_root[Delta_n(root, X_1)^2]; dsq[0] is nan

    @property
    def quenched_rhs(self) -> np.ndarray:
        """2 (H_1 + H_n - H_1^n), the per-environment bound on dsq."""
        return 2.0 * (self.H[1] + self.H - self.H1n)


def quenched_entropy(env: RootedEnvironment, n_max: int) -> QuenchedEntropy:
    nbrs, probs = env.neighbors(env.root)
    starts = np.concatenate([[env.root], nbrs])
    H = np.zeros(n_max + 1)
    H1n = np.full(n_max + 1, np.nan)
    dsq = np.full(n_max + 1, np.nan)
    h1 = entropy(probs)
    prev = None
    for t, M in trajectory(env, starts, n_max):
        H[t] = entropy(M[:, 0])
        if t >= 1:
            # H(X_1, X_n) = H(X_1) + sum_x P(root, x) H(law X_{n-1} | X_0 = x)
            Hprev = np.array([entropy(prev[:, k]) for k in range(1, prev.shape[1])])
            H1n[t] = h1 + float(probs @ Hprev)
            dsq[t] = float(probs @ _delta_cols(M[:, 0], prev[:, 1:]) ** 2)
        prev = M.copy()
    return QuenchedEntropy(H, H1n, dsq)


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    n_max: int
    weights: np.ndarray
    per_env: list  # QuenchedEntropy per replica

    def _table(self, attr: str) -> np.ndarray:
        return np.array([getattr(q, attr) for q in self.per_env])

    def _mean(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = np.array([weighted_mean(values[:, t], self.weights) for t in range(values.shape[1])])
        return out[:, 0], out[:, 1]

    @property
    def replicas(self) -> int:
        return len(self.per_env)

    @property
    def H(self) -> np.ndarray:
        return self._mean(self._table("H"))[0]

    @property
    def H1n(self) -> np.ndarray:
        return self._mean(self._table("H1n"))[0]

    @property
    def increments(self) -> np.ndarray:
        """H_n - H_{n-1} for n = 1..n_max (index 0 is nan)."""
        H = self.H
        return np.concatenate([[np.nan], np.diff(H)])

    def lhs(self) -> tuple[np.ndarray, np.ndarray]:
        """Annealed E[Delta_n(root, X_1)^2] and its standard error."""
        return self._mean(self._table("dsq"))

    def rhs(self) -> tuple[np.ndarray, np.ndarray]:
        """2 (H_n - H_{n-1}) and its standard error."""
        H = self._table("H")
        inc = np.concatenate([np.full((H.shape[0], 1), np.nan), np.diff(H, axis=1)], axis=1)
        return self._mean(2.0 * inc)

    def slack(self) -> tuple[np.ndarray, np.ndarray]:
        H = self._table("H")
        inc = np.concatenate([np.full((H.shape[0], 1), np.nan), np.diff(H, axis=1)], axis=1)
        return self._mean(2.0 * inc - self._table("dsq"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "H_n", "H1n", "increment", "lhs", "rhs", "slack", "stderr", "replicas"])
        H, H1n, inc = self.H, self.H1n, self.increments
        lhs, _ = self.lhs()
        rhs, _ = self.rhs()
        slack, se = self.slack()
        for t in range(1, self.n_max + 1):
            w.writerow([t] + ["%.12g" % v for v in (H[t], H1n[t], inc[t], lhs[t], rhs[t],
                                                      slack[t], se[t])] + [self.replicas])
        return buf.getvalue()


def entropy_profile(model: ModelSpec | Ensemble, n_max: int, replicas: int = 1,
                    master_seed: int = 0, threads: int = 1) -> EntropyProfile:
    ens = model if isinstance(model, Ensemble) else ensemble(model, replicas, master_seed, threads)
    per_env = parallel_map(lambda e: quenched_entropy(e, n_max), ens.envs, threads)
    return EntropyProfile(n_max, ens.weights, per_env)


@dataclass(frozen=True)
class EntropyCheck:
    n: int
    lhs: float
    rhs: float
    slack: float
    stderr: float


def check_theorem_entropy(model: ModelSpec | Ensemble | EntropyProfile, n: int, replicas: int = 1,
                          master_seed: int = 0, threads: int = 1) -> EntropyCheck:
    """Annealed E[Delta_n(root, X_1)^2] against 2 (H_n - H_{n-1}); reported, not asserted."""
    prof = model if isinstance(model, EntropyProfile) else entropy_profile(
        model, n, replicas, master_seed, threads)
    lhs, _ = prof.lhs()
    rhs, _ = prof.rhs()
    slack, se = prof.slack()
    return EntropyCheck(n, float(lhs[n]), float(rhs[n]), float(slack[n]), float(se[n]))


@dataclass(frozen=True)
class LiouvilleRow:
    n: int
    lhs: float  # E_root |h(root) - h(X_1)|
    rhs: float  # sqrt(2 E_root[Delta_n^2] E_root[(h(X_n) - h(root))^2]): the gradient ceiling
    dsq: float
    h2: float


def sublinear_liouville_probe(env: RootedEnvironment, h: np.ndarray, n_list) -> list[LiouvilleRow]:
    """Evaluate the Cauchy-Schwarz coupling bound on a harmonic field for each n.

    ``h`` is a dense array over the vertices; NaN marks vertices where the field
    is undefined, and the walk must not reach them within n steps. The field is
    centred at h(root) before the second moment is taken; the mean inequality is
    blind to constants, so this is the tighter form of the same bound.
    """
    h = np.asarray(h, dtype=float)
    nbrs, probs = env.neighbors(env.root)
    lhs = float(probs @ np.abs(h[env.root] - h[nbrs]))
    n_list = sorted(int(n) for n in n_list)
    starts = np.concatenate([[env.root], nbrs])
    rows = []
    prev = None
    wanted = set(n_list)
    h0 = np.where(np.isnan(h), 0.0, h)
    for t, M in trajectory(env, starts, max(n_list)):
        if t in wanted:
            reach = M[:, 0] > 0
            if np.any(np.isnan(h[reach])):
                raise ValueError(f"field undefined on the support of X_{t}")
            dsq = float(probs @ _delta_cols(M[:, 0], prev[:, 1:]) ** 2)
            h2 = float(M[:, 0] @ (h0 - h[env.root]) ** 2)
            rows.append(LiouvilleRow(t, lhs, float(np.sqrt(2.0 * dsq * h2)), dsq, h2))
        prev = M.copy()
    return rows
