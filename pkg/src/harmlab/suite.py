"""The deterministic invariant suite: instance generators and hard checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checks import InequalityViolation
from .entropy import check_lemma_xy, check_mean_inequality, check_tv_delta, entropy_profile
from .environment import RootedEnvironment, ball, gen_lattice, gen_percolation, gen_random_conductance
from .harmonic import check_reverse_poincare, dirichlet_solve, estimate_corrector
from .heatkernel import ball_kernel, check_gradient_lemma
from .models import ModelSpec, parallel_map
from .rng import make_rng


@dataclass(frozen=True)
class CheckResult:
    name: str
    model: str
    instances: int
    worst: float  # smallest slack, or largest ratio / error for "le" checks
    tol: float
    passed: bool
    kind: str = "slack"  # "slack": worst >= -tol; "ratio": worst <= 1 + tol; "error": worst <= tol

    def row(self) -> list:
        return [self.name, self.model, self.instances, "%.17g" % self.worst, "%.3g" % self.tol,
                "pass" if self.passed else "FAIL"]


def _sparse_law(rng, size: int) -> np.ndarray:
    w = rng.exponential(size=size) * (rng.random(size) > 0.3)
    if w.sum() == 0:
        w[rng.integers(size)] = 1.0
    return w / w.sum()


def joint_tables(rng, count: int, max_side: int = 8) -> list[np.ndarray]:
    """Random joint laws up to max_side x max_side, about 30% zero cells."""
    out = []
    for _ in range(count):
        a, b = rng.integers(1, max_side + 1, size=2)
        out.append(_sparse_law(rng, a * b).reshape(a, b))
    return out


def law_triples(rng, count: int, max_atoms: int = 64) -> list[tuple]:
    """Random (mu, nu, f) on a common set of at most max_atoms atoms."""
    out = []
    for _ in range(count):
        k = int(rng.integers(1, max_atoms + 1))
        out.append((_sparse_law(rng, k), _sparse_law(rng, k), rng.normal(size=k) * rng.exponential()))
    return out


def run_lemma_xy(count: int, seed: int, tol: float = 1e-10) -> tuple[CheckResult, CheckResult]:
    rng = make_rng(seed, "lemma-xy")
    worst = np.inf
    indep = 0.0
    for q in joint_tables(rng, count):
        _, _, s = check_lemma_xy(q)
        worst = min(worst, s)
        px, py = q.sum(axis=1), q.sum(axis=0)
        lhs, rhs, _ = check_lemma_xy(np.outer(px, py))
        indep = max(indep, abs(lhs) + abs(rhs))
    return (CheckResult("lemma_xy", "tables<=8x8", count, worst, tol, worst >= -tol),
            CheckResult("lemma_xy_independent", "tables<=8x8", count, indep, 1e-12,
                        indep <= 1e-12, "error"))


def run_tv_delta(count: int, seed: int, tol: float = 1e-12) -> tuple[CheckResult, CheckResult]:
    rng = make_rng(seed, "tv-delta")
    w_tv = w_mean = np.inf
    for mu, nu, f in law_triples(rng, count):
        w_tv = min(w_tv, check_tv_delta(mu, nu)[2])
        w_mean = min(w_mean, check_mean_inequality(mu, nu, f))
    return (CheckResult("tv_delta", "laws<=64", count, w_tv, tol, w_tv >= -tol),
            CheckResult("mean_inequality", "laws<=64", count, w_mean, tol, w_mean >= -tol))


def run_stationarity(model: str, n_max: int = 20, tol: float = 1e-10) -> list[CheckResult]:
    """Exact identities of a stationary environment, by propagation."""
    prof = entropy_profile(ModelSpec.parse(model), n_max)
    ident = float(np.max(np.abs(prof.H1n[1:] - prof.H[:-1] - prof.H[1])))
    inc = prof.increments[1:]
    rise = float(np.max(np.diff(inc))) if inc.size > 1 else 0.0
    slack = float(np.min(prof.slack()[0][1:]))
    return [
        CheckResult("joint_entropy_identity", model, n_max, ident, tol, ident <= tol, "error"),
        CheckResult("increments_nonincreasing", model, n_max, -rise, tol, rise <= tol),
        CheckResult("entropy_theorem", model, n_max, slack, tol, slack >= -tol),
    ]


def interior_vertices(env: RootedEnvironment, margin: int) -> np.ndarray:
    """Vertices at sup-distance >= margin from the box boundary (all of them off a box)."""
    if env.coords is None or env.meta.L == 0 or env.meta.params.get("torus"):
        return np.arange(env.n_vertices)
    far = np.max(np.abs(env.coords), axis=1) <= env.meta.L - margin
    return np.flatnonzero(far)


def reverse_poincare_fields(env: RootedEnvironment, count: int, rng, n_max: int = 8):
    """Random harmonic fields: Dirichlet on B_x(2n), boundary data affine plus noise."""
    out = []
    pool = interior_vertices(env, 2 * n_max + 1)
    for _ in range(count):
        x = int(rng.choice(pool))
        n = int(rng.integers(1, n_max + 1))
        b = ball(env, x, 2 * n)
        if b.boundary.size == 0:
            continue
        g = rng.normal(size=env.n_vertices) + rng.normal()
        if env.coords is not None:
            g = g + (env.coords - env.coords[x]) @ rng.normal(size=env.coords.shape[1])
        out.append((x, n, dirichlet_solve(env, b, g)))
    return out


def run_reverse_poincare(env: RootedEnvironment, label: str, count: int, seed: int,
                         n_max: int = 8, tol: float = 1e-9) -> CheckResult:
    rng = make_rng(seed, "reverse-poincare:" + label)
    worst = 0.0
    fields = reverse_poincare_fields(env, count, rng, n_max)
    for x, n, h in fields:
        try:
            worst = max(worst, check_reverse_poincare(env, h, x, n, tol=tol).ratio)
        except InequalityViolation as exc:
            worst = max(worst, 1.0 - exc.slack)
    return CheckResult("reverse_poincare", label, len(fields), worst, tol, worst <= 1 + tol, "ratio")


def gradient_triples(env: RootedEnvironment, count: int, rng, n_max: int = 32, per_group: int = 20):
    """Random (x, x', y, n) grouped by (x, n) so the ball kernel is shared."""
    groups = []
    left = count
    pool = interior_vertices(env, 0)
    while left > 0:
        x = int(rng.choice(pool))
        n = int(rng.integers(1, n_max + 1))
        nbrs, _ = env.neighbors(x)
        b = ball(env, x, 2 * n)
        k = min(per_group, left)
        xs = rng.choice(nbrs, size=k)
        ys = rng.choice(b.members, size=k)
        groups.append((x, n, [(int(a), int(c)) for a, c in zip(xs, ys)]))
        left -= k
    return groups


def run_gradient_lemma(env: RootedEnvironment, label: str, count: int, seed: int,
                       n_max: int = 32, tol: float = 1e-12, threads: int = 1) -> CheckResult:
    rng = make_rng(seed, "gradient-lemma:" + label)
    groups = gradient_triples(env, count, rng, n_max)

    def one(group):
        x, n, pairs = group
        bk = ball_kernel(env, x, n)
        worst = np.inf
        for xp, y in pairs:
            try:
                s = check_gradient_lemma(env, x, xp, y, n, bk=bk, tol=tol).slack
            except InequalityViolation as exc:
                s = exc.slack
            worst = min(worst, s)
        return worst

    worst = float(min(parallel_map(one, groups, threads)))
    return CheckResult("gradient_lemma", label, count, worst, tol, worst >= -tol)


def run_lattice_corrector(d: int = 2, R: int = 16, tol: float = 1e-9) -> CheckResult:
    env = gen_lattice(d, R + 1)
    err = 0.0
    for axis in range(d):
        v = np.eye(d)[axis]
        err = max(err, float(np.max(np.abs(estimate_corrector(env, v, R).chi))))
    return CheckResult("lattice_corrector_zero", f"lattice:d={d}", d, err, tol, err <= tol, "error")


def default_suite(seed: int, instances: int = 200, n_max: int = 12, gradient_triples_: int = 20,
                  tols: dict | None = None, threads: int = 1) -> list[CheckResult]:
    """Small-scale version of the whole invariant suite; every check is hard."""
    t = {"lemma_xy": 1e-10, "tv_delta": 1e-12, "stationarity": 1e-10,
         "reverse_poincare": 1e-9, "gradient": 1e-12}
    t.update(tols or {})
    envs = [
        (gen_lattice(2, 12), "lattice:d=2,L=12"),
        (gen_percolation(2, 16, 0.7, seed), "percolation:d=2,L=16,p=0.7"),
        (gen_random_conductance(2, 12, 0.5, seed), "conductance:d=2,L=12,alpha=0.5"),
    ]
    tasks = [
        lambda: run_lemma_xy(instances, seed, t["lemma_xy"]),
        lambda: run_tv_delta(instances, seed, t["tv_delta"]),
        lambda: run_stationarity("torus:d=1,side=12", n_max, t["stationarity"]),
        lambda: run_stationarity("torus:d=2,side=12", n_max, t["stationarity"]),
        lambda: [run_lattice_corrector()],
    ]
    for env, label in envs:
        tasks.append(lambda env=env, label=label: [run_reverse_poincare(
            env, label, 10, seed, 4, t["reverse_poincare"])])
    for env, label in envs[:2]:
        tasks.append(lambda env=env, label=label: [run_gradient_lemma(
            env, label, gradient_triples_, seed, 6, t["gradient"])])
    out = []
    for res in parallel_map(lambda f: f(), tasks, threads):
        out.extend(res)
    return out
