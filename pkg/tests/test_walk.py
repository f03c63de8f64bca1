import numpy as np
import pytest
from conftest import dense_law, directed_cycle

from harmlab.environment import gen_lattice, gen_percolation, gen_sierpinski, HorizonError
from harmlab.models import ModelSpec
from harmlab.walk import (
    DistributionVector,
    displacement_profile,
    heat_kernel,
    heat_kernel_row,
    propagate,
    quenched_displacement,
    sample_path,
    sample_paths,
)


def test_propagate_zero_steps(z2):
    mu = DistributionVector.from_dict(z2, {z2.root: 0.25, z2.root + 1: 0.75})
    out = propagate(z2, mu, 0)
    assert out.support == mu.support


def test_propagate_srw_z(z1):
    out = propagate(z1, DistributionVector.point(z1, z1.root), 2)
    got = {int(z1.coords[v][0]): p for v, p in out.support.items()}
    assert got == {-2: 0.25, 0: 0.5, 2: 0.25}


def test_propagate_mass_conserved():
    for env in (gen_lattice(2, 32), gen_percolation(2, 32, 0.7, 2), gen_sierpinski(5)):
        out = propagate(env, DistributionVector.point(env, env.root), 50)
        assert abs(out.total() - 1.0) <= 1e-10


def test_propagate_matches_dense_power():
    env = gen_percolation(2, 12, 0.6, 5)
    out = propagate(env, DistributionVector.point(env, env.root), 9)
    assert np.abs(out.mass - dense_law(env, env.root, 9)).max() < 1e-14


def test_propagate_refuses_horizon():
    env = gen_percolation(2, 8, 0.7, 0)
    with pytest.raises(HorizonError):
        propagate(env, DistributionVector.point(env, env.root), 17)


def test_heat_kernel_values(z1):
    assert heat_kernel(z1, z1.root, z1.root, 0) == 1.0
    assert heat_kernel(z1, z1.root, z1.root + 1, 3) == pytest.approx(0.375, abs=1e-15)


def test_heat_kernel_parity(z2):
    row = heat_kernel_row(z2, z2.root, 7)
    dist = np.abs(z2.coords - z2.coords[z2.root]).sum(axis=1)
    assert np.all(row[(dist + 7) % 2 == 1] == 0)
    assert np.all(row[(dist <= 7) & ((dist + 7) % 2 == 0)] > 0)


def test_sample_path_forced_orbit():
    env = directed_cycle(5)
    s = sample_path(env, 2, 12, stream=3)
    assert s.path.tolist() == [(2 + t) % 5 for t in range(13)]


def test_sample_first_step_frequency(z1):
    paths = sample_paths(z1, z1.root, 1, 10**6, stream=11)
    frac = np.mean(paths[:, 1] == z1.root + 1)
    assert abs(frac - 0.5) <= 0.002


def test_sample_paths_valid():
    env = gen_percolation(2, 16, 0.7, 3)
    paths = sample_paths(env, env.root, 30, 500, stream=1)
    a, b = paths[:, :-1].ravel(), paths[:, 1:].ravel()
    assert np.all(np.asarray(env.kernel[a, b]).ravel() > 0)


def test_sample_paths_stream_reproducible(z2):
    a = sample_paths(z2, z2.root, 10, 50, stream=7)
    assert np.array_equal(a, sample_paths(z2, z2.root, 10, 50, stream=7))
    assert not np.array_equal(a, sample_paths(z2, z2.root, 10, 50, stream=8))


def test_displacement_exact_z_and_z2():
    for d in (1, 2):
        env = gen_lattice(d, 30)
        prof = quenched_displacement(env, 30, metric="euclidean")
        assert np.abs(prof - np.arange(31)).max() <= 1e-10


def test_displacement_profile_deterministic_model():
    rows = displacement_profile(ModelSpec.parse("lattice:d=2,L=20"), 20, metric="euclidean")
    assert [r.n for r in rows] == list(range(21))
    assert all(abs(r.mean - r.n) < 1e-10 and r.stderr == 0 for r in rows)


def test_distribution_dump(z1):
    mu = propagate(z1, DistributionVector.point(z1, z1.root), 1)
    text = mu.dump(z1, 1)
    head, *lines = text.strip().splitlines()
    assert head.startswith("dist env_hash=") and head.endswith("n=1")
    assert sorted(ln.split()[0] for ln in lines) == ["p", "p"]
