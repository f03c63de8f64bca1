import numpy as np
import pytest
import scipy.linalg as sla

from harmlab.environment import ball, gen_lattice, gen_percolation, gen_random_conductance
from harmlab.harmonic import (
    DirichletError,
    ball_means,
    check_lemma_b,
    check_reverse_poincare,
    dirichlet_candidates,
    dirichlet_solve,
    dirichlet_solve_many,
    estimate_corrector,
    gram_dimension_probe,
    mean_value_residual,
    numerical_rank,
    poincare_constant,
    poincare_pencil_dense,
    proper_cover,
    volume_doubling,
    zero_mean_subspace,
)
from harmlab.rng import make_rng


def coord(env, k):
    return (env.coords[:, k] - env.coords[env.root, k]).astype(float)


def test_dirichlet_constant(perc):
    h = dirichlet_solve(perc, ball(perc, perc.root, 6), np.full(perc.n_vertices, 2.5))
    assert np.abs(h.values - 2.5).max() < 1e-12


def test_dirichlet_segment(z1):
    n = 15
    h = dirichlet_solve(z1, ball(z1, z1.root, n), coord(z1, 0))
    assert np.abs(h.values - coord(z1, 0)[h.ball.members]).max() < 1e-10


@pytest.mark.parametrize("method", ["direct", "krylov", "fixed_point"])
def test_dirichlet_linear_z2(z2, method):
    v = np.array([0.3, -1.2])
    g = coord(z2, 0) * v[0] + coord(z2, 1) * v[1]
    h = dirichlet_solve(z2, ball(z2, z2.root, 10), g, method=method)
    assert np.abs(h.values - g[h.ball.members]).max() < 1e-8


def test_dirichlet_methods_agree():
    env = gen_random_conductance(2, 12, 0.4, 1)
    b = ball(env, env.root, 8)
    g = make_rng(1, "g").normal(size=env.n_vertices)
    hs = [dirichlet_solve(env, b, g, method=m).values for m in ("direct", "krylov", "fixed_point")]
    assert np.abs(hs[0] - hs[1]).max() < 1e-8 and np.abs(hs[0] - hs[2]).max() < 1e-8
    dense = dirichlet_solve(env, b, g).dense(env.n_vertices)
    assert mean_value_residual(env, dense, b.inner) < 1e-12


def test_dirichlet_empty_boundary():
    env = gen_lattice(2, 3, torus=True)
    with pytest.raises(ValueError):
        dirichlet_solve(env, ball(env, env.root, 20), np.zeros(env.n_vertices))


def test_reverse_poincare_constant(perc):
    h = np.ones(perc.n_vertices)
    res = check_reverse_poincare(perc, h, perc.root, 4)
    assert res.lhs == 0 and res.rhs > 0


@pytest.mark.parametrize("n", [1, 3, 5, 10])
def test_reverse_poincare_linear_z(z1, n):
    x = coord(z1, 0)
    res = check_reverse_poincare(z1, x, z1.root, n)
    k = np.arange(-2 * n, 2 * n + 1)
    assert res.lhs == pytest.approx(2 * n)
    assert res.rhs == pytest.approx(4 / n**2 * np.sum(2 * k**2.0))
    assert res.ratio <= 1


def test_reverse_poincare_rejects_non_harmonic(z2):
    x = coord(z2, 0) ** 2
    with pytest.raises(ValueError):
        check_reverse_poincare(z2, x, z2.root, 3)


@pytest.mark.parametrize("n", [2, 5, 11, 20, 30])
def test_poincare_interval_dense_oracle(n):
    env = gen_lattice(1, 70)
    cp = poincare_constant(env, env.root, n, tol=1e-12)
    A, L = poincare_pencil_dense(env, env.root, n)
    # dense generalized eigensolve of variance vs energy; adding the all-ones
    # matrix grounds the Laplacian without touching mean-zero directions
    vals = sla.eig(A, L + np.ones(L.shape))[0].real
    assert cp * n**2 == pytest.approx(vals[np.isfinite(vals)].max(), rel=1e-8)
    assert ball(env, env.root, 2 * n).members.size == L.shape[0] == 4 * n + 1


def test_poincare_stable_z2():
    env = gen_lattice(2, 70)
    cps = [poincare_constant(env, env.root, n) for n in (8, 16, 32)]
    assert max(cps) / min(cps) <= 1.2


def test_volume_doubling_lattice():
    z2 = gen_lattice(2, 70)
    small = volume_doubling(z2, [z2.root], 2).max
    big = volume_doubling(z2, [z2.root], 32).max
    assert abs(big - 4) < abs(small - 4) and big <= 4
    z1 = gen_lattice(1, 70)
    assert all(volume_doubling(z1, [z1.root], n).max <= 2 for n in (1, 5, 30))


def test_volume_doubling_percolation():
    env = gen_percolation(2, 130, 0.7, 3)
    for n in (16, 32, 64):
        r = volume_doubling(env, [env.root], n).max
        assert 3 <= r <= 6


def test_cover_single_ball(z2):
    c = proper_cover(z2, z2.root, 5, 10)
    assert c.count == 1 and c.overlap == 1


def test_cover_property_and_overlap():
    env = gen_lattice(2, 70)
    c = proper_cover(env, env.root, 32, 8)
    target = set(ball(env, env.root, 32).members.tolist())
    covered = set()
    for b in c.balls(env):
        covered |= set(b.members.tolist())
    assert target <= covered
    counts = np.zeros(env.n_vertices, dtype=int)
    for y in c.centers:
        counts[ball(env, int(y), 16).members] += 1
    assert counts.max() == c.overlap
    cvd = volume_doubling(env, c.centers, 8).max
    assert c.overlap <= cvd**4


def test_zero_mean_already_zero(z2):
    cover = proper_cover(z2, z2.root, 4, 2)
    f = np.zeros(z2.n_vertices)
    zm = zero_mean_subspace(z2, [f, f.copy()], cover)
    assert zm.dim == 2


def test_zero_mean_generic_dimension(z2):
    cover = proper_cover(z2, z2.root, 6, 3)
    rng = make_rng(0, "zm")
    fields = [rng.normal(size=z2.n_vertices) for _ in range(cover.count + 1)]
    assert zero_mean_subspace(z2, fields, cover).dim >= 1


def test_zero_mean_single_ball(z2):
    cover = proper_cover(z2, z2.root, 3, 6)
    assert cover.count == 1
    fields = [np.ones(z2.n_vertices), coord(z2, 0) + 1.0, coord(z2, 1) - 2.0]
    zm = zero_mean_subspace(z2, fields, cover)
    assert zm.dim == 2
    assert np.abs(ball_means(z2, list(zm.fields.T), cover)).max() < 1e-10


def test_lemma_b_zero_field(z2):
    res = check_lemma_b(z2, np.zeros(z2.n_vertices), 0.25, 4)
    assert res.lhs == 0 and res.rhs == 0


def worst_zero_mean(env, n, eps, fields):
    """The zero-mean combination with the largest mass ratio B(n) / B(4n)."""
    big = ball(env, env.root, 4 * n)
    cover = proper_cover(env, env.root, n, int(round(eps * n)))
    F = zero_mean_subspace(env, fields, cover).fields
    small = big.members[big.distance <= n]
    A = F[small].T @ (F[small] * env.nu[small, None])
    B = F[big.members].T @ (F[big.members] * env.nu[big.members, None])
    sb, U = np.linalg.eigh(B)
    keep = sb > 1e-12 * sb[-1]
    T = U[:, keep] / np.sqrt(sb[keep])
    w, V = np.linalg.eigh(T.T @ A @ T)
    return F @ (T @ V[:, -1]), w[-1], cover


def test_lemma_b_linear_z2():
    # x corrected into the zero-mean subspace: basis fields have orthonormal coefficients
    n = 32
    env = gen_lattice(2, 4 * n + 1)
    cover = proper_cover(env, env.root, n, n // 4)
    G = make_rng(2, "lb").normal(size=(env.n_vertices, cover.count))
    fields = [coord(env, 0)] + dirichlet_solve_many(env, ball(env, env.root, 4 * n), G)
    zm = zero_mean_subspace(env, fields, cover)
    assert zm.dim >= 1
    for k in range(zm.dim):
        assert check_lemma_b(env, zm.fields[:, k], 0.25, n, cover=cover).ratio <= 1


def test_lemma_b_eps_sweep():
    n = 16
    env = gen_lattice(2, 4 * n + 2)
    G = make_rng(0, "lemma-b").normal(size=(env.n_vertices, 400))
    fields = dirichlet_solve_many(env, ball(env, env.root, 4 * n), G)
    q = {}
    for eps in (0.5, 0.25):
        h, q[eps], cover = worst_zero_mean(env, n, eps, fields)
        assert check_lemma_b(env, h, eps, n, cover=cover).ratio <= 1
    assert q[0.25] <= q[0.5] / 4


def test_gram_dependent_on_z():
    env = gen_lattice(1, 200)
    x = coord(env, 0)
    for n in (4, 16):
        rep = gram_dimension_probe(env, [np.ones_like(x), x, 2 * x + 3], n)
        assert rep.rank_n == 2 and rep.rank_4n == 2
        assert rep.verdict == "dependent on B(n)"


def test_gram_z2_rank():
    env = gen_lattice(2, 260)
    x, y = coord(env, 0), coord(env, 1)
    for n in (16, 32, 64):
        rep = gram_dimension_probe(env, [np.ones_like(x), x, y], n)
        assert rep.rank_n == 3 and rep.rank_4n == 3
        rep4 = gram_dimension_probe(env, [np.ones_like(x), x, y, x * y], n)
        assert rep4.rank_n == 4 and rep4.hadamard_n > 0.1


def test_gram_rank_helper():
    r, s = numerical_rank(np.diag([1.0, 1e-3, 1e-12]))
    assert r == 2 and s.size == 3


def test_dirichlet_candidates_harmonic(perc):
    fields = dirichlet_candidates(perc, 8)
    assert len(fields) == 3
    assert all(f.residual < 1e-10 for f in fields)


def test_corrector_zero_on_lattice():
    for d in (1, 2, 3):
        env = gen_lattice(d, 9)
        est = estimate_corrector(env, np.eye(d)[0], 8)
        assert np.abs(est.chi).max() < 1e-9


def test_corrector_1d_closed_form():
    R = 30
    env = gen_random_conductance(1, R, 0.3, 4)
    est = estimate_corrector(env, [1.0], R)
    xs = coord(env, 0)
    order = np.argsort(xs)  # vertices from -R to R
    W = env.weights.toarray()
    resist = 1.0 / np.array([W[order[k], order[k + 1]] for k in range(2 * R)])
    h = -R + 2 * R * np.concatenate([[0.0], np.cumsum(resist)]) / resist.sum()
    chi = np.empty(env.n_vertices)
    chi[order] = h - xs[order]
    got = np.full(env.n_vertices, np.nan)
    got[est.field.ball.members] = est.chi
    assert np.nanmax(np.abs(got - chi)) < 1e-8


def test_corrector_needs_coords():
    from harmlab.environment import gen_sierpinski

    with pytest.raises(ValueError):
        estimate_corrector(gen_sierpinski(3), [1.0], 4)


def test_dirichlet_error_type():
    assert issubclass(DirichletError, Exception)
