import numpy as np
import pytest

from harmlab.environment import gen_lattice, gen_percolation


@pytest.fixture(scope="session")
def z1():
    return gen_lattice(1, 40)


@pytest.fixture(scope="session")
def z2():
    return gen_lattice(2, 24)


@pytest.fixture(scope="session")
def perc():
    return gen_percolation(2, 24, 0.7, 1)


def dense_kernel(env):
    return env.kernel.toarray()


def dense_law(env, x, n):
    """Row x of P^n by dense matrix power: the independent propagation oracle."""
    return np.linalg.matrix_power(dense_kernel(env), n)[x]


def directed_cycle(n):
    """x -> x + 1 mod n with probability one: a deterministic, non-reversible chain."""
    import scipy.sparse as sp

    from harmlab.environment import EnvMeta, RootedEnvironment

    P = sp.csr_matrix((np.ones(n), (np.arange(n), (np.arange(n) + 1) % n)), shape=(n, n))
    return RootedEnvironment(P, 0, EnvMeta("cycle"))


ACCEPTANCE = []  # (criterion, passed, detail) in execution order


def record(criterion, passed, detail):
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append((criterion, passed, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, _, line in sorted(ACCEPTANCE, key=lambda t: t[0]):
            terminalreporter.write_line(line)
