import numpy as np
import pytest
from conftest import dense_kernel, directed_cycle

from harmlab.checks import InequalityViolation
from harmlab.entropy import (
    check_lemma_xy,
    check_mean_inequality,
    check_theorem_entropy,
    check_tv_delta,
    delta,
    delta_n,
    entropy,
    entropy_profile,
    sublinear_liouville_probe,
)
from harmlab.environment import ball, gen_lattice, gen_percolation, gen_torus
from harmlab.harmonic import dirichlet_solve
from harmlab.models import ModelSpec
from harmlab.walk import heat_kernel_row

LOG2 = np.log(2.0)


def test_entropy_values(z1):
    assert entropy([0, 1, 0]) == 0
    for k in (1, 3, 10):
        assert entropy(np.full(k, 1 / k)) == pytest.approx(np.log(k), abs=1e-15)
    assert entropy(heat_kernel_row(z1, z1.root, 2)) == pytest.approx(1.5 * LOG2, abs=1e-15)
    assert 1.5 * LOG2 == pytest.approx(1.039721, abs=1e-6)


def test_delta_values():
    mu = np.array([0.2, 0.3, 0.5])
    assert delta(mu, mu) == 0
    assert delta([0.5, 0.5, 0, 0], [0, 0, 0.3, 0.7]) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert delta([1, 0], [0.5, 0.5]) == pytest.approx(np.sqrt(2 / 3), abs=1e-15)


def test_tv_delta_cases():
    assert check_tv_delta([0.4, 0.6], [0.4, 0.6]) == (0.0, 0.0, 0.0)
    tv, dl, slack = check_tv_delta([1, 0], [0, 1])
    assert tv == 2 and dl * np.sqrt(2) == pytest.approx(2) and abs(slack) < 1e-15


def test_mean_inequality_cases():
    mu, nu = np.array([0.7, 0.3]), np.array([0.1, 0.9])
    s = check_mean_inequality(mu, nu, np.full(2, -3.0))
    assert s == pytest.approx(delta(mu, nu) * 3 * np.sqrt(2), rel=1e-14)
    assert check_mean_inequality([1, 0], [0, 1], [0, 1]) == pytest.approx(np.sqrt(2) - 1, abs=1e-15)


def test_violation_is_raised():
    with pytest.raises(InequalityViolation):
        from harmlab.checks import require

        require("demo", -1e-6, 1e-12)


def test_delta_n_deterministic_chain():
    env = directed_cycle(5)
    # X_1 from 0 is 1, and law(X_0 = 1) is the point mass at 1
    assert delta_n(env, 0, 1, 1) == 0
    assert delta_n(env, 0, 2, 1) == pytest.approx(np.sqrt(2))


def test_delta_n_six_cycle_oracle():
    env = gen_torus(1, 6)
    P = dense_kernel(env)
    a = np.linalg.matrix_power(P, 3)[0]
    b = np.linalg.matrix_power(P, 2)[1]
    expect = np.sqrt(sum((a[k] - b[k]) ** 2 / (a[k] + b[k]) for k in range(6) if a[k] + b[k] > 0))
    assert delta_n(env, 0, 1, 3) == pytest.approx(expect, abs=1e-15)


def test_delta_n_asymmetric():
    env = directed_cycle(3)
    assert delta_n(env, 0, 1, 1) == 0
    assert delta_n(env, 1, 0, 1) > 0


def test_lemma_xy_cases():
    lhs, rhs, _ = check_lemma_xy(np.outer([0.3, 0.7], [0.1, 0.5, 0.4]))
    assert abs(lhs) + abs(rhs) <= 1e-12
    lhs, rhs, slack = check_lemma_xy(np.diag([0.5, 0.5]))
    assert lhs == pytest.approx(2 / 3, abs=1e-15)
    assert rhs == pytest.approx(2 * LOG2, abs=1e-15)
    assert slack > 0


def test_lemma_xy_rejects_bad_table():
    with pytest.raises(ValueError):
        check_lemma_xy(np.array([[0.5, 0.6]]))


@pytest.mark.parametrize("model", ["torus:d=1,side=12", "torus:d=2,side=12"])
def test_torus_stationarity(model):
    prof = entropy_profile(ModelSpec.parse(model), 20)
    assert np.abs(prof.H1n[1:] - prof.H[:-1] - prof.H[1]).max() <= 1e-10
    inc = prof.increments[1:]
    assert np.all(np.diff(inc) <= 1e-10)
    slack, _ = prof.slack()
    assert slack[1:].min() >= -1e-10
    chk = check_theorem_entropy(prof, 20)
    assert chk.slack >= -1e-10 and chk.stderr == 0


def test_profile_csv_columns():
    prof = entropy_profile(ModelSpec.parse("torus:d=1,side=12"), 4)
    lines = prof.to_csv().splitlines()
    assert lines[0].startswith("n,H_n,H1n,increment,lhs,rhs,slack")
    assert len(lines) == 5  # header plus n = 1..4


def test_profile_thread_invariance():
    spec = ModelSpec.parse("percolation:d=2,L=16,p=0.7")
    a = entropy_profile(spec, 12, replicas=4, master_seed=5, threads=1).to_csv()
    b = entropy_profile(spec, 12, replicas=4, master_seed=5, threads=3).to_csv()
    assert a == b


def test_liouville_constant():
    env = gen_lattice(2, 20)
    rows = sublinear_liouville_probe(env, np.full(env.n_vertices, 3.0), [4, 8])
    assert all(r.lhs == 0 and r.rhs == 0 for r in rows)


def test_liouville_linear_on_z():
    env = gen_lattice(1, 80)
    h = env.coords[:, 0].astype(float)
    rows = sublinear_liouville_probe(env, h, [1, 2, 4, 8, 16, 32, 64])
    for r in rows:
        assert r.lhs == 1.0
        assert r.rhs >= 1.0


def test_liouville_bound_shrinks_with_growth():
    for seed in range(3):
        env = gen_percolation(2, 64, 0.7, seed)
        X = (env.coords - env.coords[env.root]).astype(float)
        r = np.linalg.norm(X, axis=1)
        ratios = []
        for beta in (1.0, 0.75, 0.5):
            bound = []
            for R in (16, 32):
                h = dirichlet_solve(env, ball(env, env.root, R), r**beta * np.sign(X[:, 0]))
                bound.append(sublinear_liouville_probe(env, h.dense(env.n_vertices), [R])[-1].rhs)
            ratios.append(bound[1] / bound[0])
        assert ratios[0] > ratios[1] > ratios[2]


def test_liouville_refuses_undefined_field():
    env = gen_lattice(2, 20)
    h = dirichlet_solve(env, ball(env, env.root, 4), env.coords[:, 0].astype(float))
    with pytest.raises(ValueError):
        sublinear_liouville_probe(env, h.dense(env.n_vertices), [6])


def test_percolation_entropy_theorem_within_two_stderr():
    prof = entropy_profile(ModelSpec.parse("percolation:d=2,L=40,p=0.7"), 64, 20, 3)
    for n in (8, 16, 32, 64):
        chk = check_theorem_entropy(prof, n)
        assert chk.slack >= -2 * chk.stderr
